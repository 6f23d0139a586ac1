"""Gamma-family special functions and log-domain helpers.

Everything here sticks to integer and half-integer orders, which is all the
rest of the library needs (orders are antenna counts M, M+1/2, M+1). Mixture
weights in the denoisers span hundreds of orders of magnitude, so densities
are combined in the log domain via log_sum_exp.
"""

import functools
import math

import numpy as np
from scipy import special as sp_special

# Linear-domain series underflow to exactly 0 beyond this point; the true
# values are < 1e-300 there for every order we support.
_EXP_UNDERFLOW = 745.0
_MAX_ORDER = 64.5


@functools.lru_cache(maxsize=512)
def _order_times_two(m):
    """Validate that m is a positive integer or half-integer, return 2*m."""
    m2 = round(2.0 * m)
    if abs(2.0 * m - m2) > 1e-9 or m2 < 1:
        raise ValueError(f"order must be a positive integer or half-integer, got {m}")
    if m > _MAX_ORDER:
        raise ValueError(f"order {m} above supported range {_MAX_ORDER}")
    return int(m2)


@functools.lru_cache(maxsize=512)
def gamma_fn(m):
    """Gamma(m) for positive integer or half-integer m.

    Integer m uses the exact factorial; half-integer m = k + 1/2 uses
    Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!).
    """
    m2 = _order_times_two(m)
    if m2 % 2 == 0:
        return float(math.factorial(m2 // 2 - 1))
    k = (m2 - 1) // 2
    return math.factorial(2 * k) * math.sqrt(math.pi) / (4.0**k * math.factorial(k))


def regularized_gamma_q(m, x):
    """Regularized upper incomplete gamma Q(m, x) = Gamma(m, x) / Gamma(m).

    m is a positive integer or half-integer; x is a nonnegative scalar or
    ndarray. Integer orders use the finite sum e^{-x} sum_{k<m} x^k / k!
    (a Poisson tail, so every term is in [0, 1] and the forward sum is
    stable). Half-integer orders start from Q(1/2, x) = erfc(sqrt(x)) and
    climb with Q(m+1, x) = Q(m, x) + x^m e^{-x} / Gamma(m+1), which only
    adds positive terms.
    """
    m2 = _order_times_two(m)
    if isinstance(x, (int, float)):
        return _q_scalar(m2, float(x))
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("x must be nonnegative")
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    # exp(-x) underflows to 0 there anyway; avoids 0 * inf in the recurrences
    x_arr = np.where(x_arr > 1e308, 1e308, x_arr)

    if m2 % 2 == 0:
        n_int = m2 // 2
        term = np.exp(-x_arr)
        q = term.copy()
        for k in range(1, n_int):
            term = term * x_arr / k
            q += term
    else:
        q = sp_special.erfc(np.sqrt(x_arr))
        # term for the step 1/2 -> 3/2 is x^{1/2} e^{-x} / Gamma(3/2)
        term = np.sqrt(x_arr) * np.exp(-x_arr) / gamma_fn(1.5)
        half_steps = (m2 - 1) // 2
        j = 0.5
        for _ in range(half_steps):
            q = q + term
            j += 1.0
            term = term * x_arr / j
    q = np.clip(q, 0.0, 1.0)
    return float(q[0]) if scalar else q


def _q_scalar(m2, x):
    """Scalar Q(m, x) without numpy overhead; hot inside threshold solvers."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if math.isinf(x):
        return 0.0
    if x > _EXP_UNDERFLOW:
        return 0.0
    if m2 % 2 == 0:
        term = math.exp(-x)
        q = term
        for k in range(1, m2 // 2):
            term *= x / k
            q += term
    else:
        q = math.erfc(math.sqrt(x))
        term = math.sqrt(x) * math.exp(-x) / gamma_fn(1.5)
        j = 0.5
        for _ in range((m2 - 1) // 2):
            q += term
            j += 1.0
            term *= x / j
    return min(max(q, 0.0), 1.0)


def upper_incomplete_gamma(m, x):
    """Unregularized upper incomplete gamma Gamma(m, x)."""
    return gamma_fn(m) * regularized_gamma_q(m, x)


def inverse_gamma_q(m, p):
    """Solve Q(m, x) = p for x, with p in (0, 1]."""
    _order_times_two(m)
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return float(sp_special.gammainccinv(m, p))


def log_gaussian_density(x, variance):
    """Log density of a circular complex Gaussian CN(0, variance * I).

    x is a length-M complex vector (or scalar). Returns
    -M log(pi * variance) - ||x||^2 / variance, saturating to -inf instead
    of overflowing when the quadratic term is astronomically large.
    """
    if variance <= 0:
        raise ValueError("variance must be positive")
    x_arr = np.atleast_1d(np.asarray(x))
    m = x_arr.shape[0]
    norm_sq = float(np.sum(np.abs(x_arr) ** 2))
    quad = norm_sq / variance
    if not math.isfinite(quad):
        return -math.inf
    return -m * math.log(math.pi * variance) - quad


def log_sum_exp(log_terms):
    """log(sum_i exp(a_i)) with the usual max subtraction.

    Accepts a 1-D array of log terms, or an (k, 2) array of
    (log-weight, log-density) pairs which are summed per row first.
    All -inf inputs give -inf; an empty input is an error.
    """
    arr = np.asarray(log_terms, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        arr = arr[:, 0] + arr[:, 1]
    if arr.ndim != 1:
        raise ValueError("expected a 1-D array or (k, 2) pairs")
    if arr.size == 0:
        raise ValueError("log_sum_exp of an empty set")
    hi = np.max(arr)
    if not np.isfinite(hi):
        # all -inf (sum is 0), or a +inf/nan input propagates
        return float(hi)
    return float(hi + np.log(np.sum(np.exp(arr - hi))))
