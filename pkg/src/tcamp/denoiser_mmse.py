"""Posterior-mean denoiser for the Bernoulli-Gaussian effective channel,
with and without the previous block's statistic as side information.

The posterior activity odds multiply three pieces: the prior odds
(1 - lam) / lam, the current-observation likelihood ratio mu_t, and a
side-information ratio built from mu evaluated at the previous statistic.
Each mu spans hundreds of orders of magnitude at realistic SNR, so all
ratios live in the log domain until the final logistic.
"""

import dataclasses
import math

import numpy as np

from .special_math import log_sum_exp

_LOG_ZERO = -math.inf


@dataclasses.dataclass
class MmsePrior:
    """Per-device prior: channel power gamma, activity rate lam and the
    chain transition probabilities."""

    gamma: float
    lam: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")
        if not 0.0 <= self.beta <= self.lam <= self.alpha <= 1.0:
            raise ValueError("need beta <= lam <= alpha")


def mu_factor(norm_sq, gamma, tau_sq, m):
    """log of the inactive/active likelihood ratio for one observed row:
    log mu = m log((tau^2 + gamma) / tau^2) - Delta ||x||^2 with
    Delta = 1/tau^2 - 1/(tau^2 + gamma). Positive at the origin, strongly
    negative for rows that look like live channels."""
    if not tau_sq > 0:
        raise ValueError("tau_sq must be positive")
    if norm_sq < 0:
        raise ValueError("norm_sq must be nonnegative")
    delta = gamma / (tau_sq * (tau_sq + gamma))
    return m * math.log1p(gamma / tau_sq) - delta * norm_sq


def log_si_ratio(si_norm_sq, prior, tau_prev_sq, m):
    """log of (beta + (1-beta) mu_inf) / (alpha + (1-alpha) mu_inf), the
    side-information multiplier on the inactive odds. mu_inf is the mu
    factor of the previous block's statistic at its converged noise level.
    Decreasing in ||si||: strong statistics shrink the inactive odds."""
    log_mu_inf = mu_factor(si_norm_sq, prior.gamma, tau_prev_sq, m)
    num = np.logaddexp(_log(prior.beta), _log1m(prior.beta) + log_mu_inf)
    den = np.logaddexp(_log(prior.alpha), _log1m(prior.alpha) + log_mu_inf)
    return float(num - den)


def _log(p):
    return math.log(p) if p > 0 else _LOG_ZERO


def _log1m(p):
    return math.log1p(-p) if p < 1 else _LOG_ZERO


def _posterior_scale(x_tilde, tau_sq, prior, extra_log_odds):
    """Common core: phi * gamma / (gamma + tau_sq) where
    phi = 1 / (1 + exp(z)) and z collects all log odds of inactivity."""
    x = np.asarray(x_tilde)
    m = x.shape[0]
    norm_sq = float(np.sum(np.abs(x) ** 2))
    log_mu_t = mu_factor(norm_sq, prior.gamma, tau_sq, m)
    z = _log1m(prior.lam) - _log(prior.lam) + log_mu_t + extra_log_odds
    log_phi = -np.logaddexp(0.0, z)
    phi = math.exp(log_phi)
    a = prior.gamma / (prior.gamma + tau_sq)
    return a, phi, z


def no_si_mmse_denoise(x_tilde, prior, tau_sq):
    """Posterior mean of one row without side information."""
    a, phi, _ = _posterior_scale(x_tilde, tau_sq, prior, 0.0)
    return a * phi * np.asarray(x_tilde)


def si_mmse_denoise(x_tilde, si, prior, tau_sq, tau_prev_sq):
    """Posterior mean of one row given the previous block's statistic row.

    Reduces exactly to no_si_mmse_denoise when alpha = beta = lam (side
    information carries nothing) or when tau_prev_sq -> inf (side
    information infinitely noisy).
    """
    si = np.asarray(si)
    m = si.shape[0]
    ratio = log_si_ratio(float(np.sum(np.abs(si) ** 2)), prior, tau_prev_sq, m)
    a, phi, _ = _posterior_scale(x_tilde, tau_sq, prior, ratio)
    return a * phi * np.asarray(x_tilde)


def jacobian_mmse(x_tilde, si, prior, tau_sq, tau_prev_sq=None):
    """Row derivative of the posterior mean (circular-perturbation
    convention): a phi I + a Delta phi (1 - phi) x x^H. si None gives the
    no-SI variant. Equals the posterior covariance divided by tau_sq."""
    x = np.asarray(x_tilde)
    m = x.shape[0]
    if si is None:
        extra = 0.0
    else:
        si = np.asarray(si)
        extra = log_si_ratio(float(np.sum(np.abs(si) ** 2)), prior, tau_prev_sq, m)
    a, phi, z = _posterior_scale(x, tau_sq, prior, extra)
    delta = prior.gamma / (tau_sq * (prior.gamma + tau_sq))
    # phi (1 - phi) without cancellation at either saturation end
    log_phi_1mphi = -(np.logaddexp(0.0, z) + np.logaddexp(0.0, -z))
    w = a * delta * math.exp(log_phi_1mphi)
    return a * phi * np.eye(m, dtype=complex) + w * np.outer(x, np.conj(x))


@dataclasses.dataclass
class PosteriorStats:
    phi: float  # posterior activity probability
    mean: np.ndarray
    second_moment: np.ndarray


def posterior_stats_general(x_tilde, si, prior, sigma_t, sigma_prev):
    """Posterior activity probability, mean and second moment for general
    Hermitian PSD effective-noise covariances (current block sigma_t,
    previous block sigma_prev).

    The four mixture components pair (active now?, active before?) with
    weights from the chain; densities are combined in the log domain. With
    scalar covariances tau^2 I this collapses to si_mmse_denoise.
    """
    x = np.asarray(x_tilde, dtype=complex)
    s = np.asarray(si, dtype=complex)
    m = x.shape[0]
    g = prior.gamma
    eye = np.eye(m)
    lam, alpha, beta = prior.lam, prior.alpha, prior.beta

    ln_x_sig = _log_density_cn(x, np.asarray(sigma_t))
    ln_x_gsig = _log_density_cn(x, g * eye + np.asarray(sigma_t))
    ln_s_sig = _log_density_cn(s, np.asarray(sigma_prev))
    ln_s_gsig = _log_density_cn(s, g * eye + np.asarray(sigma_prev))

    cases = np.array(
        [
            _log(alpha * lam) + ln_x_gsig + ln_s_gsig,  # active, was active
            _log(beta * (1 - lam)) + ln_x_gsig + ln_s_sig,  # active, was not
            _log((1 - alpha) * lam) + ln_x_sig + ln_s_gsig,  # inactive, was
            _log((1 - beta) * (1 - lam)) + ln_x_sig + ln_s_sig,  # neither
        ]
    )
    log_total = log_sum_exp(cases)
    log_active = log_sum_exp(cases[:2])
    phi = math.exp(log_active - log_total)

    inv = np.linalg.inv(g * eye + np.asarray(sigma_t))
    px = inv @ x
    mean = phi * g * px
    second = phi * (
        g * eye - g**2 * inv + g**2 * np.outer(px, np.conj(px))
    )
    return PosteriorStats(phi=phi, mean=mean, second_moment=second)


def _log_density_cn(x, cov):
    """log density of CN(0, cov) at x, cov Hermitian positive definite."""
    m = x.shape[0]
    chol = np.linalg.cholesky(cov)
    white = np.linalg.solve(chol, x)
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(chol)))))
    return -m * math.log(math.pi) - logdet - float(np.sum(np.abs(white) ** 2))
