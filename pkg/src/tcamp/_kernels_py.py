"""Pure-numpy row kernels: apply a denoiser family to every device row of a
pseudo-data matrix and accumulate the summed row Jacobian in one pass. Same
contract as the compiled extension in _kernels_cy."""

import math

import numpy as np


def soft_denoise_rows(pseudo, theta):
    """Gated group soft threshold over rows.

    pseudo: (N, M) complex. theta: (N,) per-row thresholds, +inf allowed.
    Returns (denoised (N, M), jac_sum (M, M)) where jac_sum is the sum over
    rows of (1 - theta/r) I + theta/(2 r^3) p p^H on kept rows.
    """
    pseudo = np.asarray(pseudo)
    n, m = pseudo.shape
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,))
    r = np.linalg.norm(pseudo, axis=1)
    keep = np.isfinite(theta) & (r >= theta) & (r > 0)
    scale = np.zeros(n)
    scale[keep] = 1.0 - theta[keep] / r[keep]
    out = scale[:, None] * pseudo
    jac = np.zeros((m, m), dtype=complex)
    if np.any(keep):
        jac += np.sum(scale[keep]) * np.eye(m)
        w = theta[keep] / (2.0 * r[keep] ** 3)
        kept = pseudo[keep]
        jac += (kept * w[:, None]).T @ kept.conj()
    return out, jac


def mmse_denoise_rows(pseudo, gamma, tau_sq, lam, log_si_ratio):
    """Posterior-mean denoiser over rows.

    pseudo: (N, M) complex; gamma: (N,) per-row channel powers;
    log_si_ratio: (N,) log side-information odds multiplier (zeros if none).
    Returns (denoised, jac_sum) with jac_sum the summed row derivative
    a phi I + a Delta phi(1-phi) p p^H.
    """
    pseudo = np.asarray(pseudo)
    n, m = pseudo.shape
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    lsr = np.broadcast_to(np.asarray(log_si_ratio, dtype=float), (n,))
    a = gamma / (gamma + tau_sq)
    delta = gamma / (tau_sq * (gamma + tau_sq))
    norm_sq = np.sum(np.abs(pseudo) ** 2, axis=1)
    log_mu = m * np.log1p(gamma / tau_sq) - delta * norm_sq
    z = math.log1p(-lam) - math.log(lam) + log_mu + lsr
    log_d = np.logaddexp(0.0, z)
    phi = np.exp(-log_d)
    coef = a * phi
    out = coef[:, None] * pseudo
    jac = np.sum(coef) * np.eye(m, dtype=complex)
    w = a * delta * np.exp(-(log_d + np.logaddexp(0.0, -z)))
    jac += (pseudo * w[:, None]).T @ pseudo.conj()
    return out, jac
