"""Scalar state evolution for the AMP iteration.

Tracks the effective noise level tau_t^2 seen by the row denoisers:

    tau_0^2   = sigma_z^2 + (N/L) lam mean(gamma)
    tau_t+1^2 = sigma_z^2 + (N/L) E || eta_t(x + tau_t w) - x ||^2 / M

with the expectation over a random device (its power gamma, its Markov
activity pair, fresh channels per block) evaluated by Monte Carlo through
the exact same denoiser kernels the AMP engine uses. A full-matrix variant
propagates the M x M error covariance instead of a scalar, to check the
iteration really stays isotropic.
"""

import dataclasses
import math

import numpy as np

from .amp_core import DenoiserChoice, SideInfo, _apply_denoiser

_SE_KINDS = ("soft_no_si", "soft_si", "mmse_no_si", "mmse_si")


@dataclasses.dataclass
class SeProblem:
    """Large-system limit parameters: noise floor, load N/L, antennas,
    activity chain (lam, alpha, beta) and the device power profile."""

    sigma_z_sq: float
    n_over_l: float
    m: int
    lam: float
    alpha: float
    beta: float
    gammas: np.ndarray

    def __post_init__(self):
        self.gammas = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        if self.sigma_z_sq <= 0.0:
            raise ValueError("sigma_z_sq must be positive")
        if self.n_over_l <= 0.0:
            raise ValueError("n_over_l must be positive")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")
        if not 0.0 <= self.beta <= self.lam <= self.alpha <= 1.0:
            raise ValueError("need beta <= lam <= alpha")
        if np.any(self.gammas <= 0.0):
            raise ValueError("gammas must be positive")

    def tau0_sq(self):
        return self.sigma_z_sq + self.n_over_l * self.lam * float(
            np.mean(self.gammas)
        )


@dataclasses.dataclass
class SiModel:
    """Side-information channel: the previous block's statistic rows carry
    noise tau_prev_sq; rows with norm above gate are labeled active, and
    varsigma is that gate's false-alarm rate on inactive rows."""

    tau_prev_sq: float
    gate: float = 0.0
    varsigma: float = 0.0


@dataclasses.dataclass
class SeTrace:
    kind: str
    tau_sq: list
    mse: list
    converged: bool


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(
        2.0
    )


def _draw_population(problem, si_model, rng, n_reps):
    """One Monte Carlo population: every device power appears n_reps times,
    with fresh activity pairs, per-block channels and SI noise."""
    g = np.tile(problem.gammas, n_reps)
    k = g.size
    m = problem.m
    delta_prev = rng.random(k) < problem.lam
    u = rng.random(k)
    delta_cur = np.where(delta_prev, u < problem.alpha, u < problem.beta)
    h_cur = np.sqrt(g)[:, None] * _crandn(rng, k, m)
    x = np.where(delta_cur[:, None], h_cur, 0.0)
    si = None
    if si_model is not None:
        h_prev = np.sqrt(g)[:, None] * _crandn(rng, k, m)
        rows = np.where(delta_prev[:, None], h_prev, 0.0)
        if si_model.tau_prev_sq > 0.0:
            rows = rows + math.sqrt(si_model.tau_prev_sq) * _crandn(rng, k, m)
        si = SideInfo(
            si_vectors=rows,
            tau_prev_sq=max(si_model.tau_prev_sq, 1e-300),
            block_index=0,
        )
    return g, x, si


def _choice_for(problem, kind, si_model, gammas_rows):
    if kind not in _SE_KINDS:
        raise ValueError(f"unknown state evolution kind {kind!r}")
    if kind in ("soft_si", "mmse_si") and si_model is None:
        raise ValueError(f"{kind} needs an SiModel")
    return DenoiserChoice(
        kind=kind,
        lam=problem.lam,
        alpha=problem.alpha,
        beta=problem.beta,
        gammas=gammas_rows if kind.startswith("mmse") else None,
        varsigma=si_model.varsigma if si_model is not None else 0.0,
        si_gate=si_model.gate if si_model is not None else 0.0,
    )


def se_step(tau_sq, problem, kind, si_model=None, rng=None, n_reps=20):
    """One state evolution update. Returns (tau_next_sq, mse) where mse is
    the Monte Carlo estimate of the per-row denoising error E||eta - x||^2."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    g, x, si = _draw_population(problem, si_model, rng, n_reps)
    pseudo = x + math.sqrt(tau_sq) * _crandn(rng, g.size, problem.m)
    choice = _choice_for(problem, kind, si_model, g)
    out, _ = _apply_denoiser(pseudo, si, choice, tau_sq)
    mse = float(np.mean(np.sum(np.abs(out - x) ** 2, axis=1)))
    tau_next = problem.sigma_z_sq + problem.n_over_l * mse / problem.m
    return tau_next, mse


def se_step_matrix(sigma, problem, kind, si_model=None, rng=None, n_reps=20):
    """Full-covariance variant: propagates the M x M effective noise
    covariance. The denoiser itself still runs at the scalar level
    tr(sigma)/M, matching what the AMP engine would do. Returns
    (sigma_next, entrywise Monte Carlo standard error of sigma_next)."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    sigma = np.asarray(sigma, dtype=complex)
    m = problem.m
    g, x, si = _draw_population(problem, si_model, rng, n_reps)
    chol = np.linalg.cholesky(sigma)
    pseudo = x + _crandn(rng, g.size, m) @ chol.conj().T
    tau_eff_sq = float(np.real(np.trace(sigma))) / m
    choice = _choice_for(problem, kind, si_model, g)
    out, _ = _apply_denoiser(pseudo, si, choice, tau_eff_sq)
    err = out - x
    prods = err[:, :, None] * err[:, None, :].conj()
    err_cov = prods.mean(axis=0)
    stderr = prods.std(axis=0) / math.sqrt(g.size)
    sigma_next = problem.sigma_z_sq * np.eye(m) + problem.n_over_l * err_cov
    return sigma_next, problem.n_over_l * np.abs(stderr)


def run_se(problem, kind, si_model=None, seed=0, n_reps=20, max_iter=50, tol=1e-4):
    """Iterate the scalar state evolution to its fixed point."""
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    tau_sq = problem.tau0_sq()
    taus = [tau_sq]
    mses = []
    converged = False
    for _ in range(max_iter):
        tau_next, mse = se_step(tau_sq, problem, kind, si_model, rng, n_reps)
        taus.append(tau_next)
        mses.append(mse)
        if abs(tau_next - tau_sq) <= tol * tau_sq:
            converged = True
            tau_sq = tau_next
            break
        tau_sq = tau_next
    return SeTrace(kind=kind, tau_sq=taus, mse=mses, converged=converged)
