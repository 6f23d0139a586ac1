"""Group soft-threshold denoiser with a binary side-information gate, and the
minimax design of its two thresholds.

The denoiser row map is eta(x) = (1 - theta / ||x||) x for ||x|| >= theta and
0 otherwise, with theta picked per device by whether the previous block's
statistic cleared the gate. The two thresholds minimize the worst-case
(over channel magnitude) risk of each gate branch; both branch risks are
convex in theta with a unique stationary point, located by bisection on the
half-derivative f_i.
"""

import dataclasses
import math
from typing import NamedTuple

import numpy as np

from .special_math import gamma_fn, regularized_gamma_q

_MAX_DOUBLINGS = 200
_BISECT_ITERS = 90


class JointActivityProbs(NamedTuple):
    """P(current activity, previous gate decision); first index is the
    current block's activity, second is the side-information label."""

    p11: float
    p01: float
    p10: float
    p00: float


def joint_activity_probs(lam, alpha, beta, varsigma_prev):
    """Joint law of (activity now, gate label from the previous block) under
    the least-favorable prior: truly active devices are always flagged,
    inactive ones are flagged w.p. varsigma_prev."""
    vs = varsigma_prev
    if not 0.0 <= vs <= 1.0:
        raise ValueError("varsigma must be in [0, 1]")
    p11 = beta * (1 - lam) * vs + alpha * lam
    p01 = (1 - beta) * (1 - lam) * vs + (1 - alpha) * lam
    p10 = beta * (1 - lam) * (1 - vs)
    p00 = (1 - beta) * (1 - lam) * (1 - vs)
    return JointActivityProbs(p11=p11, p01=p01, p10=p10, p00=p00)


@dataclasses.dataclass
class MinimaxContext:
    """Everything the threshold design needs: antenna count, current noise
    level, activity law, and the previous gate's false-alarm rate."""

    m: int
    tau: float
    lam: float
    alpha: float
    beta: float
    varsigma: float

    def __post_init__(self):
        if self.m < 1 or self.m != int(self.m):
            raise ValueError("m must be a positive integer")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")
        if not 0.0 <= self.beta <= self.lam <= self.alpha <= 1.0:
            raise ValueError("need beta <= lam <= alpha for a stationary chain")
        if not 0.0 <= self.varsigma <= 1.0:
            raise ValueError("varsigma must be in [0, 1]")

    def probs(self):
        return joint_activity_probs(self.lam, self.alpha, self.beta, self.varsigma)


@dataclasses.dataclass
class BinaryThreshold:
    """Thresholds for the two gate branches plus the gate level itself.
    theta_si_active applies when the previous statistic cleared si_gate.
    An infinite threshold means that branch always returns zero."""

    theta_si_active: float
    theta_si_inactive: float
    si_gate: float

    def __post_init__(self):
        if not (self.theta_si_active >= 0 and self.theta_si_inactive >= 0):
            raise ValueError("thresholds must be nonnegative")
        if self.theta_si_active > self.theta_si_inactive:
            raise ValueError("SI-active threshold cannot exceed SI-inactive one")


def soft_threshold(x, theta):
    """Group soft threshold on one row vector."""
    x = np.asarray(x)
    r = math.sqrt(float(np.sum(np.abs(x) ** 2)))
    if not math.isfinite(theta):
        return np.zeros_like(x)
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if r >= theta and r > 0:
        return (1.0 - theta / r) * x
    if theta == 0.0:
        return x.copy()
    return np.zeros_like(x)


def si_soft_denoise(x_tilde, si, thr):
    """Denoise one row given its side-information row: pick the branch
    threshold by comparing ||si|| to the gate (ties go inactive)."""
    theta = _branch_theta(si, thr)
    return soft_threshold(x_tilde, theta)


def jacobian_soft(x_tilde, si, thr):
    """Derivative of the gated soft threshold w.r.t. the row input, in the
    convention where a circularly-symmetric perturbation contributes
    (1 - theta/r) I + theta/(2 r^3) x x^H on the kept branch and 0 in the
    dead zone."""
    x = np.asarray(x_tilde)
    m = x.shape[0]
    theta = _branch_theta(si, thr)
    r = math.sqrt(float(np.sum(np.abs(x) ** 2)))
    if not math.isfinite(theta) or r < theta or r == 0.0:
        return np.zeros((m, m), dtype=complex)
    jac = (1.0 - theta / r) * np.eye(m, dtype=complex)
    jac += (theta / (2.0 * r**3)) * np.outer(x, np.conj(x))
    return jac


def _branch_theta(si, thr):
    si = np.asarray(si)
    stat = math.sqrt(float(np.sum(np.abs(si) ** 2)))
    return thr.theta_si_active if stat > thr.si_gate else thr.theta_si_inactive


def varsigma(m, gate, tau_prev):
    """False-alarm probability of the gate on a pure-noise statistic:
    P(||tau_prev v|| > gate) = Q(m, gate^2 / tau_prev^2) for v ~ CN(0, I)."""
    if not tau_prev > 0:
        raise ValueError("tau_prev must be positive")
    if gate < 0:
        raise ValueError("gate must be nonnegative")
    return regularized_gamma_q(m, (gate / tau_prev) ** 2)


def _g_half(m):
    # Gamma(m + 1/2) / Gamma(m), roughly sqrt(m)
    return gamma_fn(m + 0.5) / gamma_fn(m)


def varpi(m, tau, theta):
    """Risk of soft thresholding a pure-noise row at level theta:
    E || eta(tau v, theta) ||^2 for v ~ CN(0, I_m). Vectorized over theta."""
    if isinstance(theta, (int, float)):
        # scalar fast path: hot inside the threshold bisection
        if math.isinf(theta):
            return 0.0
        u = (theta / tau) ** 2
        return (
            theta * theta * regularized_gamma_q(m, u)
            - 2.0 * theta * tau * _g_half(m) * regularized_gamma_q(m + 0.5, u)
            + tau * tau * m * regularized_gamma_q(m + 1, u)
        )
    theta_arr = np.asarray(theta, dtype=float)
    scalar = theta_arr.ndim == 0
    th = np.atleast_1d(theta_arr)
    out = np.zeros_like(th)
    fin = np.isfinite(th)
    u = (th[fin] / tau) ** 2
    gh = _g_half(m)
    out[fin] = (
        th[fin] ** 2 * regularized_gamma_q(m, u)
        - 2.0 * th[fin] * tau * gh * regularized_gamma_q(m + 0.5, u)
        + tau**2 * m * regularized_gamma_q(m + 1, u)
    )
    return float(out[0]) if scalar else out


def xi(m, tau, theta):
    """Half-derivative of varpi in theta. Negative at 0, tends to 0 from
    below, so w_act * theta + w_miss * xi crosses zero exactly once."""
    if isinstance(theta, (int, float)):
        if math.isinf(theta):
            return 0.0
        u = (theta / tau) ** 2
        return theta * regularized_gamma_q(m, u) - tau * _g_half(
            m
        ) * regularized_gamma_q(m + 0.5, u)
    theta_arr = np.asarray(theta, dtype=float)
    scalar = theta_arr.ndim == 0
    th = np.atleast_1d(theta_arr)
    out = np.zeros_like(th)
    fin = np.isfinite(th)
    u = (th[fin] / tau) ** 2
    out[fin] = th[fin] * regularized_gamma_q(m, u) - tau * _g_half(
        m
    ) * regularized_gamma_q(m + 0.5, u)
    return float(out[0]) if scalar else out


def f1(theta, ctx):
    """Stationarity function of the SI-active branch risk (half its
    derivative in theta)."""
    p = ctx.probs()
    return p.p01 * xi(ctx.m, ctx.tau, theta) + p.p11 * np.asarray(theta, dtype=float)


def f2(theta, ctx):
    """Stationarity function of the SI-inactive branch risk."""
    p = ctx.probs()
    return p.p00 * xi(ctx.m, ctx.tau, theta) + p.p10 * np.asarray(theta, dtype=float)


def _solve_root(w_xi, w_th, m, tau):
    """Root of w_th * theta + w_xi * xi(theta) on [0, inf).

    w_xi = 0 degenerates to theta = 0; w_th = 0 leaves the function negative
    everywhere (xi < 0), which means the branch should always shrink to
    zero, returned as +inf.
    """
    if w_xi < 0 or w_th < 0:
        raise ValueError("weights must be nonnegative")
    if w_xi == 0.0 and w_th == 0.0:
        return math.inf
    if w_xi == 0.0:
        return 0.0
    if w_th == 0.0:
        return math.inf
    # the root depends on the weights only through their ratio; normalizing
    # makes branches with equal ratios land on bitwise-identical roots
    ratio = w_xi / w_th

    def f(theta):
        return theta + ratio * xi(m, tau, theta)

    lo, hi = 0.0, tau
    grew = False
    for _ in range(_MAX_DOUBLINGS):
        if f(hi) > 0.0:
            grew = True
            break
        lo = hi
        hi *= 2.0
    if not grew:
        return math.inf
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_thresholds(ctx, si_gate=0.0):
    """Minimax thresholds for both gate branches at the current noise level.
    si_gate is carried along for branch classification downstream."""
    p = ctx.probs()
    th1 = _solve_root(p.p01, p.p11, ctx.m, ctx.tau)
    th2 = _solve_root(p.p00, p.p10, ctx.m, ctx.tau)
    if th2 < th1 <= th2 * (1.0 + 1e-12):
        # equal branch odds up to rounding (alpha = beta): collapse the tie
        th1 = th2 = min(th1, th2)
    return BinaryThreshold(
        theta_si_active=th1, theta_si_inactive=th2, si_gate=si_gate
    )


def no_si_threshold(m, tau, lam):
    """Single minimax threshold when no side information exists: root of
    lam * theta + (1 - lam) * xi(theta). Coincides with both branch
    thresholds when alpha = beta = lam."""
    return _solve_root(1.0 - lam, lam, m, tau)


def mse_theorem1(theta1, theta2, ctx):
    """Least-favorable per-branch risks of the gated soft threshold.

    Returns (total, branch_active, branch_inactive). The active-gate branch
    pays (tau^2 m + theta1^2) whenever the device is truly active (channel
    magnitude taken to infinity) and varpi(theta1) on false alarms; the
    inactive-gate branch is the same with its own weights.
    """
    p = ctx.probs()
    b1 = _branch_risk(p.p11, p.p01, theta1, ctx)
    b2 = _branch_risk(p.p10, p.p00, theta2, ctx)
    return b1 + b2, b1, b2


def _branch_risk(w_th, w_xi, theta, ctx):
    if math.isinf(theta):
        # infinite threshold: the branch always outputs 0, so only truly
        # active devices contribute, losing their full channel energy; under
        # the least-favorable magnitude that is unbounded unless w_th = 0
        return 0.0 if w_th == 0.0 else math.inf
    active_term = w_th * (ctx.tau**2 * ctx.m + theta**2)
    return active_term + w_xi * varpi(ctx.m, ctx.tau, theta)


def _grid_minimize(w_th, w_xi, ctx, resolution, span):
    if w_xi == 0.0 and w_th == 0.0:
        return math.inf
    if w_xi == 0.0:
        return 0.0
    if w_th == 0.0:
        return math.inf
    lo, hi, step = 0.0, span * ctx.tau, resolution * ctx.tau
    for stage_step in (1e-2 * ctx.tau, step):
        grid = np.arange(lo, hi + 0.5 * stage_step, stage_step)
        risks = w_th * (ctx.tau**2 * ctx.m + grid**2) + w_xi * varpi(
            ctx.m, ctx.tau, grid
        )
        best = int(np.argmin(risks))
        if best == grid.size - 1 and grid[best] >= span * ctx.tau - stage_step:
            return math.inf
        lo = max(grid[best] - stage_step, 0.0)
        hi = grid[best] + stage_step
    return float(grid[best])


def grid_search_thresholds(ctx, resolution=1e-4, span=16.0):
    """Brute-force minimizer of each branch risk on a theta grid, refined to
    resolution * tau. Slow path kept as an independent check of
    solve_thresholds; a minimum pinned at the far edge of the grid is
    reported as an infinite threshold (branch always outputs zero)."""
    if resolution <= 0 or span <= 0:
        raise ValueError("resolution and span must be positive")
    p = ctx.probs()
    th1 = _grid_minimize(p.p11, p.p01, ctx, resolution, span)
    th2 = _grid_minimize(p.p10, p.p00, ctx, resolution, span)
    if th2 < th1 <= th2 + 2.0 * resolution * ctx.tau:
        # near-equal branch odds can land one grid step out of order
        th1 = th2
    return BinaryThreshold(
        theta_si_active=th1, theta_si_inactive=th2, si_gate=0.0
    )
