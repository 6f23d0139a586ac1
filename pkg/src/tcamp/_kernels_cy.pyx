# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled row kernels; same contract as _kernels_py."""

import numpy as np

from libc.math cimport exp, isfinite, log, log1p, sqrt


cdef inline double _softplus(double z) nogil:
    # log(1 + e^z) without overflow
    if z > 0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


def soft_denoise_rows(pseudo, theta):
    pseudo = np.ascontiguousarray(pseudo, dtype=np.complex128)
    cdef Py_ssize_t n = pseudo.shape[0], m = pseudo.shape[1]
    theta_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(theta, dtype=np.float64), (n,))
    )
    out_arr = np.zeros((n, m), dtype=np.complex128)
    jac_arr = np.zeros((m, m), dtype=np.complex128)

    cdef const double complex[:, ::1] p = pseudo
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[:, ::1] jac = jac_arr
    cdef const double[::1] th = theta_arr

    cdef Py_ssize_t i, a, b
    cdef double r2, r, s, w, t
    cdef double diag_acc = 0.0
    cdef double complex pa

    for i in range(n):
        t = th[i]
        r2 = 0.0
        for a in range(m):
            pa = p[i, a]
            r2 += pa.real * pa.real + pa.imag * pa.imag
        r = sqrt(r2)
        if not isfinite(t) or r < t or r == 0.0:
            continue
        s = 1.0 - t / r
        w = t / (2.0 * r * r2)
        diag_acc += s
        for a in range(m):
            out[i, a] = s * p[i, a]
        for a in range(m):
            pa = p[i, a]
            for b in range(m):
                jac[a, b] = jac[a, b] + w * pa * p[i, b].conjugate()
    for a in range(m):
        jac[a, a] = jac[a, a] + diag_acc
    return out_arr, jac_arr


def mmse_denoise_rows(pseudo, gamma, tau_sq, lam, log_si_ratio):
    pseudo = np.ascontiguousarray(pseudo, dtype=np.complex128)
    cdef Py_ssize_t n = pseudo.shape[0], m = pseudo.shape[1]
    gamma_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(gamma, dtype=np.float64), (n,))
    )
    lsr_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(log_si_ratio, dtype=np.float64), (n,))
    )
    out_arr = np.zeros((n, m), dtype=np.complex128)
    jac_arr = np.zeros((m, m), dtype=np.complex128)

    cdef const double complex[:, ::1] p = pseudo
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[:, ::1] jac = jac_arr
    cdef const double[::1] g = gamma_arr
    cdef const double[::1] lsr = lsr_arr

    cdef double ts = tau_sq
    cdef double log_prior_odds = log1p(-lam) - log(lam)
    cdef Py_ssize_t i, a, b
    cdef double norm_sq, a_i, delta, z, log_d, phi, coef, w
    cdef double diag_acc = 0.0
    cdef double complex pa

    for i in range(n):
        norm_sq = 0.0
        for a in range(m):
            pa = p[i, a]
            norm_sq += pa.real * pa.real + pa.imag * pa.imag
        a_i = g[i] / (g[i] + ts)
        delta = g[i] / (ts * (g[i] + ts))
        z = log_prior_odds + m * log1p(g[i] / ts) - delta * norm_sq + lsr[i]
        log_d = _softplus(z)
        phi = exp(-log_d)
        coef = a_i * phi
        diag_acc += coef
        w = a_i * delta * exp(-(log_d + _softplus(-z)))
        for a in range(m):
            out[i, a] = coef * p[i, a]
        if w != 0.0:
            for a in range(m):
                pa = p[i, a]
                for b in range(m):
                    jac[a, b] = jac[a, b] + w * pa * p[i, b].conjugate()
    for a in range(m):
        jac[a, a] = jac[a, a] + diag_acc
    return out_arr, jac_arr
