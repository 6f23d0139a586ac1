import math

import numpy as np
import pytest
from scipy import integrate

from tcamp import denoiser_soft as ds
from tcamp.special_math import gamma_fn


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def fd_complex_jacobian(fn, x, eps):
    """Central differences on the real embedding, combined into the
    circular-perturbation derivative (d_re - i d_im) / 2 column-wise."""
    m = x.shape[0]
    jac = np.zeros((m, m), dtype=complex)
    for k in range(m):
        e = np.zeros(m, dtype=complex)
        e[k] = 1.0
        d_re = (fn(x + eps * e) - fn(x - eps * e)) / (2 * eps)
        d_im = (fn(x + 1j * eps * e) - fn(x - 1j * eps * e)) / (2 * eps)
        jac[:, k] = 0.5 * (d_re - 1j * d_im)
    return jac


def radial_pdf(m, tau, r):
    # ||tau v|| for v ~ CN(0, I_m)
    return 2.0 * r ** (2 * m - 1) * np.exp(-((r / tau) ** 2)) / (
        gamma_fn(m) * tau ** (2 * m)
    )


def oracle_varpi_quad(m, tau, theta):
    val, err = integrate.quad(
        lambda r: (r - theta) ** 2 * radial_pdf(m, tau, r),
        theta,
        np.inf,
        limit=300,
        epsabs=0.0,
        epsrel=1e-11,
    )
    assert err <= 1e-9 * max(val, 1e-300)
    return val


def oracle_xi_quad(m, tau, theta):
    val, err = integrate.quad(
        lambda r: -(r - theta) * radial_pdf(m, tau, r),
        theta,
        np.inf,
        limit=300,
        epsabs=1e-300,
        epsrel=1e-11,
    )
    return val


def test_soft_threshold_basics():
    x = np.array([3.0 + 4.0j])
    out = ds.soft_threshold(x, 2.0)
    assert abs(np.abs(out[0]) - 3.0) < 1e-12  # magnitude 5 shrunk by 2
    assert abs(np.angle(out[0]) - np.angle(x[0])) < 1e-12
    assert np.all(ds.soft_threshold(x, 5.0) == 0)  # tie shrinks to zero
    assert np.all(ds.soft_threshold(x, 7.0) == 0)
    assert np.array_equal(ds.soft_threshold(x, 0.0), x)
    assert np.all(ds.soft_threshold(x, math.inf) == 0)
    assert np.all(ds.soft_threshold(np.zeros(3, complex), 0.0) == 0)
    with pytest.raises(ValueError):
        ds.soft_threshold(x, -1.0)


def test_soft_threshold_properties():
    rng = np.random.default_rng(0)
    for _ in range(300):
        m = int(rng.integers(1, 6))
        x = crandn(rng, m) * rng.uniform(0.1, 5)
        theta = float(rng.uniform(0, 3))
        out = ds.soft_threshold(x, theta)
        r = np.linalg.norm(x)
        # norm shrinks by exactly theta on the kept branch
        assert abs(np.linalg.norm(out) - max(r - theta, 0.0)) < 1e-12
        # phase equivariance
        ph = np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert np.allclose(ds.soft_threshold(ph * x, theta), ph * out, atol=1e-14)


def test_joint_activity_probs_reference_values():
    lam, alpha = 0.1, 0.91
    beta = 0.01
    p = ds.joint_activity_probs(lam, alpha, beta, 0.0)
    assert abs(p.p11 - alpha * lam) < 1e-15
    assert abs(p.p01 - (1 - alpha) * lam) < 1e-15
    assert abs(p.p10 - beta * (1 - lam)) < 1e-15
    assert abs(p.p00 - (1 - beta) * (1 - lam)) < 1e-15
    for vs in (0.0, 0.1, 0.5, 1.0):
        p = ds.joint_activity_probs(lam, alpha, beta, vs)
        assert abs(sum(p) - 1.0) < 1e-12
        assert min(p) >= 0.0


def test_varsigma_matches_noise_exceedance():
    rng = np.random.default_rng(4)
    m, tau_prev = 2, 0.7
    noise = tau_prev * crandn(rng, 400_000, m)
    stats = np.linalg.norm(noise, axis=1)
    for gate in (0.2, 0.7, 1.4):
        emp = np.mean(stats > gate)
        pred = ds.varsigma(m, gate, tau_prev)
        assert abs(emp - pred) < 3.5 * math.sqrt(pred * (1 - pred) / stats.size)
    assert ds.varsigma(1, 0.0, 1.0) == 1.0


def test_varpi_against_quadrature_and_mc():
    for m, tau, theta in [(1, 1.0, 1.0), (2, 0.5, 0.8), (4, 2.0, 1.3), (1, 1.0, 0.0)]:
        got = ds.varpi(m, tau, theta)
        ref = oracle_varpi_quad(m, tau, theta)
        assert abs(got - ref) <= 1e-9 * ref
    # Monte Carlo oracle at the canonical point
    rng = np.random.default_rng(12)
    v = crandn(rng, 10_000_000, 1)
    shrunk = np.maximum(np.abs(v[:, 0]) - 1.0, 0.0)
    mc = np.mean(shrunk**2)
    assert abs(ds.varpi(1, 1.0, 1.0) - mc) <= 1e-3 * mc
    # theta = 0 leaves the noise untouched: risk is tau^2 m
    assert abs(ds.varpi(3, 0.4, 0.0) - 0.4**2 * 3) < 1e-12
    assert ds.varpi(2, 1.0, math.inf) == 0.0


def test_xi_against_quadrature():
    for m, tau, theta in [(1, 1.0, 1.0), (2, 0.5, 0.8), (4, 2.0, 1.3)]:
        got = ds.xi(m, tau, theta)
        ref = oracle_xi_quad(m, tau, theta)
        assert abs(got - ref) <= 1e-8 * abs(ref)
    # xi is half the derivative of varpi
    for m, tau, theta in [(1, 1.0, 0.7), (3, 1.3, 2.0)]:
        h = 1e-5 * tau
        fd = (ds.varpi(m, tau, theta + h) - ds.varpi(m, tau, theta - h)) / (2 * h)
        assert abs(ds.xi(m, tau, theta) - 0.5 * fd) < 1e-7 * abs(fd)


def test_xi_negative_and_f_increasing():
    m, tau = 2, 1.4
    thetas = np.linspace(0.0, 8.0, 200)
    vals = ds.xi(m, tau, thetas)
    assert np.all(vals < 0)
    ctx = ds.MinimaxContext(m=m, tau=tau, lam=0.1, alpha=0.55, beta=0.05, varsigma=0.1)
    for f in (ds.f1, ds.f2):
        fv = f(thetas, ctx)
        assert np.all(np.diff(fv) > 0)
    # value at zero is -p01 * tau * Gamma(m+1/2)/Gamma(m) exactly
    p = ctx.probs()
    expect0 = -p.p01 * tau * gamma_fn(m + 0.5) / gamma_fn(m)
    assert abs(ds.f1(0.0, ctx) - expect0) < 1e-14
    assert ds.f1(0.0, ctx) < 0


def test_solve_thresholds_residual_and_order():
    rng = np.random.default_rng(9)
    for _ in range(60):
        lam = rng.uniform(0.02, 0.4)
        alpha = rng.uniform(lam, 1.0)
        beta = lam * (1 - alpha) / (1 - lam)
        ctx = ds.MinimaxContext(
            m=int(rng.integers(1, 5)),
            tau=float(10 ** rng.uniform(-7, 1)),
            lam=lam,
            alpha=alpha,
            beta=beta,
            varsigma=float(rng.uniform(0, 1)),
        )
        thr = ds.solve_thresholds(ctx)
        p = ctx.probs()
        scale = (p.p01 + p.p11) * ctx.tau
        assert abs(ds.f1(thr.theta_si_active, ctx)) <= 1e-12 * scale
        if math.isfinite(thr.theta_si_inactive):
            scale2 = (p.p00 + p.p10) * ctx.tau
            assert abs(ds.f2(thr.theta_si_inactive, ctx)) <= 1e-12 * scale2
        assert thr.theta_si_active <= thr.theta_si_inactive


def test_solve_thresholds_no_si_reduction():
    # alpha = beta = lam: the gate carries no information and both branch
    # thresholds collapse to the single no-SI minimax threshold
    ref = ds.no_si_threshold(2, 0.9, 0.2)
    for vs in (0.0, 0.3, 1.0):
        ctx = ds.MinimaxContext(m=2, tau=0.9, lam=0.2, alpha=0.2, beta=0.2, varsigma=vs)
        thr = ds.solve_thresholds(ctx)
        assert abs(thr.theta_si_active - ref) < 1e-12 * ref
        if vs < 1.0:
            # at vs = 1 the gate-inactive branch has probability zero and
            # the solver reports the always-shrink sentinel instead
            assert abs(thr.theta_si_inactive - ref) < 1e-12 * ref
        else:
            assert math.isinf(thr.theta_si_inactive)


def test_solve_thresholds_degenerate_branch():
    # beta = 0 and a clean gate: a gate-inactive device cannot be active,
    # so that branch should always shrink to zero (infinite threshold)
    ctx = ds.MinimaxContext(m=1, tau=1.0, lam=0.1, alpha=1.0, beta=0.0, varsigma=0.0)
    thr = ds.solve_thresholds(ctx)
    assert math.isinf(thr.theta_si_inactive)
    assert math.isfinite(thr.theta_si_active)
    total, b1, b2 = ds.mse_theorem1(thr.theta_si_active, thr.theta_si_inactive, ctx)
    assert b2 == 0.0 and math.isfinite(total)


def test_fig1_style_context_threshold_separation():
    # strong persistence and a clean gate push the two thresholds far apart
    ctx = ds.MinimaxContext(
        m=1, tau=2e-6, lam=0.1, alpha=0.91, beta=0.01, varsigma=0.0
    )
    thr = ds.solve_thresholds(ctx)
    assert thr.theta_si_active < 0.2 * ctx.tau
    assert 1.0 * ctx.tau < thr.theta_si_inactive < 3.0 * ctx.tau
    # and the no-SI threshold sits between them
    ref = ds.no_si_threshold(1, 2e-6, 0.1)
    assert thr.theta_si_active < ref < thr.theta_si_inactive


def test_mse_theorem1_monte_carlo_point_mass():
    rng = np.random.default_rng(21)
    m, tau = 2, 0.8
    ctx = ds.MinimaxContext(m=m, tau=tau, lam=0.1, alpha=0.55, beta=0.05, varsigma=0.1)
    thr = ds.solve_thresholds(ctx)
    p = ctx.probs()
    n = 400_000
    h = np.full(m, 1e6 * tau, dtype=complex)  # magnitude far past the threshold
    u = rng.uniform(size=n)
    # joint draw over (activity, gate label)
    cuts = np.cumsum([p.p11, p.p01, p.p10, p.p00])
    case = np.searchsorted(cuts, u)
    active = (case == 0) | (case == 2)
    si_on = case <= 1
    x = np.where(active[:, None], h, 0.0)
    noisy = x + tau * crandn(rng, n, m)
    theta = np.where(si_on, thr.theta_si_active, thr.theta_si_inactive)
    r = np.linalg.norm(noisy, axis=1)
    scale = np.where(r >= theta, 1.0 - theta / np.maximum(r, 1e-300), 0.0)
    err = np.sum(np.abs(scale[:, None] * noisy - x) ** 2, axis=1)
    total, b1, b2 = ds.mse_theorem1(thr.theta_si_active, thr.theta_si_inactive, ctx)
    assert abs(err.mean() - total) < 0.02 * total
    assert abs(err[si_on].sum() / n - b1) < 0.03 * b1
    assert abs(err[~si_on].sum() / n - b2) < 0.03 * max(b2, 1e-12)


def test_si_soft_denoise_gate_branching():
    thr = ds.BinaryThreshold(theta_si_active=0.5, theta_si_inactive=2.0, si_gate=1.0)
    x = np.array([1.2 + 0j])
    strong_si = np.array([3.0 + 0j])
    weak_si = np.array([0.2 + 0j])
    tie_si = np.array([1.0 + 0j])
    out_strong = ds.si_soft_denoise(x, strong_si, thr)
    out_weak = ds.si_soft_denoise(x, weak_si, thr)
    out_tie = ds.si_soft_denoise(x, tie_si, thr)
    assert abs(out_strong[0] - 0.7) < 1e-12
    assert out_weak[0] == 0.0  # 1.2 < 2.0
    assert np.array_equal(out_tie, out_weak)  # tie goes to the inactive branch
    with pytest.raises(ValueError):
        ds.BinaryThreshold(theta_si_active=2.0, theta_si_inactive=0.5, si_gate=1.0)


def test_jacobian_soft_against_finite_differences():
    rng = np.random.default_rng(33)
    thr = ds.BinaryThreshold(theta_si_active=0.6, theta_si_inactive=1.7, si_gate=1.0)
    checked = 0
    for _ in range(200):
        m = int(rng.integers(1, 5))
        x = crandn(rng, m) * rng.uniform(0.2, 4.0)
        si = crandn(rng, m) * rng.uniform(0.2, 4.0)
        theta = ds._branch_theta(si, thr)
        r = np.linalg.norm(x)
        if abs(r - theta) < 0.1 * theta:  # stay away from the kink
            continue
        jac = ds.jacobian_soft(x, si, thr)
        fd = fd_complex_jacobian(lambda v: ds.si_soft_denoise(v, si, thr), x, 1e-6)
        denom = max(np.linalg.norm(fd), 1e-12)
        assert np.linalg.norm(jac - fd) <= 1e-6 * denom
        checked += 1
    assert checked > 100


def test_jacobian_soft_dead_zone_and_identity_limit():
    thr = ds.BinaryThreshold(theta_si_active=1.0, theta_si_inactive=1.0, si_gate=0.0)
    x_small = np.array([0.1 + 0.2j, 0.05j])
    assert np.all(ds.jacobian_soft(x_small, x_small, thr) == 0)
    # far above threshold the map is nearly the identity
    x_big = np.array([200.0 + 0j, 100.0 + 50.0j])
    jac = ds.jacobian_soft(x_big, x_big, thr)
    assert np.linalg.norm(jac - np.eye(2)) < 0.02


def test_grid_search_matches_root_solver():
    rng = np.random.default_rng(77)
    for _ in range(15):
        lam = rng.uniform(0.02, 0.5)
        alpha = rng.uniform(lam, 0.98)
        ctx = ds.MinimaxContext(
            m=int(rng.choice([1, 2, 4])), tau=10.0 ** rng.uniform(-6, 1),
            lam=lam, alpha=alpha, beta=lam * (1 - alpha) / (1 - lam),
            varsigma=rng.uniform(0.01, 0.9),
        )
        fast = ds.solve_thresholds(ctx)
        slow = ds.grid_search_thresholds(ctx, resolution=1e-4)
        tol = 1.5e-4 * ctx.tau
        assert abs(fast.theta_si_active - slow.theta_si_active) <= tol
        assert abs(fast.theta_si_inactive - slow.theta_si_inactive) <= tol


def test_grid_search_degenerate_case_and_validation():
    ctx = ds.MinimaxContext(m=2, tau=0.3, lam=0.1, alpha=0.1, beta=0.1,
                            varsigma=0.2)
    slow = ds.grid_search_thresholds(ctx)
    assert slow.theta_si_active == slow.theta_si_inactive  # equal branch odds
    with pytest.raises(ValueError):
        ds.grid_search_thresholds(ctx, resolution=0.0)
    with pytest.raises(ValueError):
        ds.grid_search_thresholds(ctx, span=-1.0)
