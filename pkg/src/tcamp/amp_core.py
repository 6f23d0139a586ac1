"""The AMP iteration for the multi-antenna random-access model Y = S X + Z.

State per iteration: the estimate matrix X_t, the corrected residual R_t and
the empirical noise level tau_hat_t^2 = ||R_t||_F^2 / (L M). Each step forms
row-wise pseudo-data X_t + S^H R_t, applies the chosen row denoiser, and
rebuilds the residual with an Onsager correction driven by the summed row
Jacobian. Starting from X_0 = 0, R_0 = Y, the pseudo-data row for device n
behaves like x_n plus CN(0, tau_t^2 I) noise, which is what both denoiser
families assume.
"""

import dataclasses
import math

import numpy as np

from . import kernels
from .denoiser_soft import MinimaxContext, no_si_threshold, solve_thresholds

_VALID_KINDS = ("identity", "soft_no_si", "soft_si", "mmse_no_si", "mmse_si")


class DivergenceError(RuntimeError):
    """Raised when the residual energy explodes or turns non-finite."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration


@dataclasses.dataclass
class AmpState:
    x_mat: np.ndarray  # (N, M)
    residual: np.ndarray  # (L, M)
    tau_hat_sq: float
    t: int


@dataclasses.dataclass
class SideInfo:
    """What one block hands to the next: the converged statistic rows
    x_hat + S^H R and the converged noise level they carry."""

    si_vectors: np.ndarray  # (N, M)
    tau_prev_sq: float
    block_index: int


@dataclasses.dataclass
class DenoiserChoice:
    """Row denoiser selection plus the parameters that family needs.

    kind: one of identity, soft_no_si, soft_si, mmse_no_si, mmse_si.
    gammas: per-device channel powers (mmse kinds).
    varsigma / si_gate: previous gate's false-alarm rate and level (soft_si).
    forced_prev_active: optional boolean mask overriding the gate
    classification (used by genie-aided side information).
    """

    kind: str
    lam: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    gammas: np.ndarray | None = None
    varsigma: float = 0.0
    si_gate: float = 0.0
    forced_prev_active: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _VALID_KINDS:
            raise ValueError(f"unknown denoiser kind {self.kind!r}")
        if self.kind != "identity" and not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")
        if self.kind in ("mmse_no_si", "mmse_si") and self.gammas is None:
            raise ValueError(f"{self.kind} requires per-device gammas")
        if self.kind in ("soft_si", "mmse_si") and not (
            0.0 <= self.beta <= self.lam <= self.alpha <= 1.0
        ):
            raise ValueError("need beta <= lam <= alpha")


@dataclasses.dataclass
class BlockEstimate:
    x_hat: np.ndarray
    residual: np.ndarray
    statistics: np.ndarray  # (N,) detection statistic ||x_hat_n + R^H s_n||
    detected: np.ndarray | None
    tau_hat_sq: float
    iterations: int
    converged: bool


def init_state(pilots, y):
    n = pilots.shape[1]
    m = y.shape[1]
    l = y.shape[0]
    tau_sq = float(np.sum(np.abs(y) ** 2)) / (l * m)
    return AmpState(
        x_mat=np.zeros((n, m), dtype=complex),
        residual=np.array(y, dtype=complex),
        tau_hat_sq=tau_sq,
        t=0,
    )


def pseudo_data(state, pilots):
    """Row-space pseudo observations X_t + S^H R_t; row n is the per-device
    vector the denoiser sees."""
    return state.x_mat + pilots.conj().T @ state.residual


def _si_log_ratio_rows(si, choice, m):
    """Vectorized log SI odds multiplier for mmse_si (see denoiser_mmse)."""
    g = np.asarray(choice.gammas, dtype=float)
    tp = si.tau_prev_sq
    norm_sq = np.sum(np.abs(si.si_vectors) ** 2, axis=1)
    delta = g / (tp * (tp + g))
    log_mu = m * np.log1p(g / tp) - delta * norm_sq
    log_b = math.log(choice.beta) if choice.beta > 0 else -math.inf
    log_1mb = math.log1p(-choice.beta) if choice.beta < 1 else -math.inf
    log_a = math.log(choice.alpha) if choice.alpha > 0 else -math.inf
    log_1ma = math.log1p(-choice.alpha) if choice.alpha < 1 else -math.inf
    return np.logaddexp(log_b, log_1mb + log_mu) - np.logaddexp(
        log_a, log_1ma + log_mu
    )


def _apply_denoiser(pseudo, si, choice, tau_sq):
    n, m = pseudo.shape
    if choice.kind == "identity":
        return pseudo.copy(), n * np.eye(m, dtype=complex)
    if tau_sq <= 0.0:
        # exact-fit limit: nothing left to denoise
        return pseudo.copy(), n * np.eye(m, dtype=complex)
    if choice.kind == "soft_no_si":
        theta = no_si_threshold(m, math.sqrt(tau_sq), choice.lam)
        return kernels.soft_denoise_rows(pseudo, np.full(n, theta))
    if choice.kind == "soft_si":
        ctx = MinimaxContext(
            m=m,
            tau=math.sqrt(tau_sq),
            lam=choice.lam,
            alpha=choice.alpha,
            beta=choice.beta,
            varsigma=choice.varsigma,
        )
        thr = solve_thresholds(ctx, si_gate=choice.si_gate)
        if choice.forced_prev_active is not None:
            mask = np.asarray(choice.forced_prev_active, dtype=bool)
        else:
            stats = np.linalg.norm(si.si_vectors, axis=1)
            mask = stats > choice.si_gate
        theta = np.where(mask, thr.theta_si_active, thr.theta_si_inactive)
        return kernels.soft_denoise_rows(pseudo, theta)
    if choice.kind == "mmse_no_si":
        return kernels.mmse_denoise_rows(
            pseudo, np.asarray(choice.gammas, float), tau_sq, choice.lam, np.zeros(n)
        )
    # mmse_si
    lsr = _si_log_ratio_rows(si, choice, m)
    return kernels.mmse_denoise_rows(
        pseudo, np.asarray(choice.gammas, float), tau_sq, choice.lam, lsr
    )


def amp_step(state, pilots, y, si, choice, onsager="matrix", tau_sq_override=None):
    """One AMP iteration.

    onsager: 'matrix' applies the summed row Jacobian J_sum to every
    residual row, R_t J_sum^T / L (J_sum in the column convention
    d eta_i / d x_j, so acting on a row of R means multiplying by the
    plain transpose); 'scalar' collapses J_sum to its mean diagonal
    entry, (N/L) <diag> R_t; 'none' drops the correction (plain
    iterative thresholding, for ablations).
    """
    l, n = pilots.shape
    m = y.shape[1]
    pseudo = pseudo_data(state, pilots)
    tau_sq = state.tau_hat_sq if tau_sq_override is None else float(tau_sq_override)
    x_next, jac_sum = _apply_denoiser(pseudo, si, choice, tau_sq)
    if onsager == "matrix":
        correction = state.residual @ jac_sum.T / l
    elif onsager == "scalar":
        mean_diag = float(np.real(np.trace(jac_sum))) / (n * m)
        correction = (n / l) * mean_diag * state.residual
    elif onsager == "none":
        correction = 0.0
    else:
        raise ValueError(f"unknown onsager mode {onsager!r}")
    residual = y - pilots @ x_next + correction
    tau_sq_next = float(np.sum(np.abs(residual) ** 2)) / (l * m)
    if not math.isfinite(tau_sq_next):
        raise DivergenceError("residual energy is not finite", state.t)
    return AmpState(
        x_mat=x_next, residual=residual, tau_hat_sq=tau_sq_next, t=state.t + 1
    )


def run_block(
    pilots,
    y,
    si,
    choice,
    max_iter=50,
    tol=1e-6,
    onsager="matrix",
    tau_schedule=None,
    operating_gate=None,
    divergence_factor=10.0,
    block_index=0,
):
    """Run AMP to convergence on one coherence block.

    si is the previous block's SideInfo or None. tau_schedule, if given,
    replaces the empirical noise level with a precomputed sequence (e.g.
    from state evolution). Returns (BlockEstimate, SideInfo for the next
    block). Raises DivergenceError if the residual energy grows past
    divergence_factor times its starting value.
    """
    state = init_state(pilots, y)
    tau0 = state.tau_hat_sq
    converged = False
    for t in range(max_iter):
        override = None
        if tau_schedule is not None:
            override = tau_schedule[min(t, len(tau_schedule) - 1)]
        prev_x = state.x_mat
        state = amp_step(
            state, pilots, y, si, choice, onsager=onsager, tau_sq_override=override
        )
        if state.tau_hat_sq > divergence_factor * max(tau0, 1e-300):
            raise DivergenceError(
                f"residual energy grew {state.tau_hat_sq / tau0:.2f}x", t
            )
        dx = float(np.linalg.norm(state.x_mat - prev_x))
        ref = float(np.linalg.norm(prev_x))
        if dx <= tol * ref or (ref == 0.0 and dx == 0.0):
            converged = True
            break
    si_rows = state.x_mat + pilots.conj().T @ state.residual
    stats = np.linalg.norm(si_rows, axis=1)
    detected = None if operating_gate is None else stats > operating_gate
    estimate = BlockEstimate(
        x_hat=state.x_mat,
        residual=state.residual,
        statistics=stats,
        detected=detected,
        tau_hat_sq=state.tau_hat_sq,
        iterations=state.t,
        converged=converged,
    )
    si_out = SideInfo(
        si_vectors=si_rows, tau_prev_sq=state.tau_hat_sq, block_index=block_index
    )
    return estimate, si_out
