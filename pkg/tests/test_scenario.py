import json
import math

import numpy as np
import pytest

from tcamp import scenario as sc


def test_derive_beta_known_points():
    assert abs(sc.derive_beta(0.1, 0.55) - 0.05) < 1e-15
    assert abs(sc.derive_beta(0.1, 0.91) - 0.01) < 1e-15
    # alpha = lam gives beta = lam (independent blocks)
    assert abs(sc.derive_beta(0.3, 0.3) - 0.3) < 1e-15
    assert sc.derive_beta(0.2, 1.0) == 0.0


def test_derive_beta_stationarity_identity():
    rng = np.random.default_rng(0)
    for _ in range(500):
        lam = rng.uniform(0.01, 0.95)
        alpha = rng.uniform(lam, 1.0)
        beta = sc.derive_beta(lam, alpha)
        assert abs(alpha * lam + beta * (1 - lam) - lam) < 1e-15


def test_derive_beta_rejects_bad_inputs():
    with pytest.raises(sc.ConfigError):
        sc.derive_beta(0.0, 0.5)
    with pytest.raises(sc.ConfigError):
        sc.derive_beta(0.4, 0.2)


def test_noise_variance_reference_scenario():
    cfg = sc.ScenarioConfig()
    # -169 dBm/Hz + 10 log10(1e7) - 23 dBm = -122 dB
    assert abs(sc.noise_variance(cfg) - 10.0**-12.2) < 1e-27
    cfg0 = sc.ScenarioConfig(tx_power_dbm=0.0, noise_psd_dbm_hz=0.0, bandwidth_hz=1.0)
    assert sc.noise_variance(cfg0) == 1.0


def test_cell_edge_snr_anchor():
    cfg = sc.ScenarioConfig()
    gain_edge = sc.pathloss_gain(0.5)
    snr = gain_edge / sc.noise_variance(cfg)
    expected = 10.0 ** ((-128.1 - 36.7 * math.log10(0.5) + 122.0) / 10.0)
    assert abs(snr - expected) < 1e-12 * expected
    assert abs(snr - 3.12) < 0.01
    assert abs(10 * math.log10(snr) - 4.9) < 0.05


def test_pathloss_monotone():
    d = np.linspace(0.01, 0.5, 200)
    g = sc.pathloss_gain(d)
    assert np.all(np.diff(g) < 0)
    with pytest.raises(sc.ConfigError):
        sc.pathloss_gain(0.0)


def test_place_devices_annulus_statistics():
    cfg = sc.ScenarioConfig(n_devices=1_000_000)
    rng = np.random.default_rng(42)
    placements = sc.place_devices(cfg, rng)
    d = np.array([p.distance_km for p in placements])
    assert d.min() >= sc.MIN_DISTANCE_KM
    assert d.max() <= 0.5
    # area-uniform on a disk has mean distance 2R/3
    assert abs(d.mean() - 2.0 / 3.0 * 0.5) < 0.01 * (2.0 / 3.0 * 0.5)
    g = sc.gamma_vector(placements)
    assert np.all(g > 0)
    # nearest devices have the largest gains
    assert g[np.argmin(d)] == g.max()


def test_place_devices_degenerate_models():
    cfg = sc.ScenarioConfig(n_devices=50, channel_model="unit_rayleigh")
    g = sc.gamma_vector(sc.place_devices(cfg, np.random.default_rng(0)))
    assert np.all(g == 1.0)
    cfg = sc.ScenarioConfig(n_devices=50, channel_model="point_mass_radius(0.3)")
    pl = sc.place_devices(cfg, np.random.default_rng(0))
    g = sc.gamma_vector(pl)
    assert np.all(g == g[0])
    assert abs(g[0] - sc.pathloss_gain(0.3)) < 1e-25
    assert all(p.distance_km == 0.3 for p in pl)


def test_generate_pilots_statistics_and_determinism():
    L, N = 64, 4000
    s1 = sc.generate_pilots(L, N, 99)
    s2 = sc.generate_pilots(L, N, 99)
    assert np.array_equal(s1, s2)
    assert s1.shape == (L, N)
    col_energy = np.sum(np.abs(s1) ** 2, axis=0)
    assert abs(col_energy.mean() - 1.0) < 0.01
    # per-entry variance 1/L, split evenly between real and imaginary parts
    assert abs(np.var(s1.real) - 0.5 / L) < 0.02 / L
    assert abs(np.var(s1.imag) - 0.5 / L) < 0.02 / L
    s3 = sc.generate_pilots(L, N, 100)
    assert not np.array_equal(s1, s3)


def test_activity_chain_marginals_and_transitions():
    lam, alpha = 0.1, 0.55
    beta = sc.derive_beta(lam, alpha)
    rng = np.random.default_rng(5)
    n = 60_000
    act = sc.initial_activity(n, lam, rng)
    rates = [act.mean()]
    trans_11 = trans_01 = prev_1 = prev_0 = 0
    for _ in range(9):
        nxt = sc.step_activity(act, lam, alpha, rng)
        trans_11 += np.sum(nxt & act)
        trans_01 += np.sum(nxt & ~act)
        prev_1 += np.sum(act)
        prev_0 += np.sum(~act)
        act = nxt
        rates.append(act.mean())
    for r in rates:
        assert abs(r - lam) < 0.005
    assert abs(trans_11 / prev_1 - alpha) < 0.01
    assert abs(trans_01 / prev_0 - beta) < 0.01


def test_activity_chain_degenerate_cases():
    rng = np.random.default_rng(8)
    start = sc.initial_activity(5000, 0.2, rng)
    frozen = sc.step_activity(start, 0.2, 1.0, rng)
    assert np.array_equal(frozen, start)
    # alpha = beta = lam: next block independent of the previous one
    a = sc.initial_activity(200_000, 0.3, rng)
    b = sc.step_activity(a, 0.3, 0.3, rng)
    corr = np.corrcoef(a.astype(float), b.astype(float))[0, 1]
    assert abs(corr) < 0.01


def _sample_chain(cfg, pilots, gammas, rng):
    truths = []
    prev = None
    for j in range(cfg.n_blocks):
        t = sc.sample_block(cfg, pilots, gammas, prev, j, rng)
        truths.append(t)
        prev = t.activity
    return truths


def test_sample_block_support_and_shapes():
    cfg = sc.ScenarioConfig(n_devices=300, pilot_len=80, n_antennas=2, n_blocks=4)
    rng = np.random.default_rng(1)
    pilots = sc.generate_pilots(cfg.pilot_len, cfg.n_devices, rng)
    gammas = sc.gamma_vector(sc.place_devices(cfg, rng))
    truths = _sample_chain(cfg, pilots, gammas, rng)
    for t in truths:
        assert t.received.shape == (80, 2)
        assert t.effective.shape == (300, 2)
        inactive = ~t.activity
        assert np.all(t.effective[inactive] == 0)
        assert np.all(np.abs(t.effective[t.activity]) > 0)
        # effective rows equal the raw channel rows wherever active
        assert np.array_equal(t.effective[t.activity], t.channels[t.activity])


def test_sample_block_second_moment():
    # E||Y||_F^2 = lam * M * sum(gamma) + L * M * sigma_z^2, with the gains
    # held fixed so only activity/channel/noise randomness remains
    cfg = sc.ScenarioConfig(n_devices=100, pilot_len=30, n_antennas=2, n_blocks=1)
    rng = np.random.default_rng(17)
    pilots = sc.generate_pilots(cfg.pilot_len, cfg.n_devices, rng)
    gammas = sc.gamma_vector(sc.place_devices(cfg, rng))
    expected = (
        cfg.activity_prob * cfg.n_antennas * gammas.sum()
        + cfg.pilot_len * cfg.n_antennas * sc.noise_variance(cfg)
    )
    total = 0.0
    n_trials = 1200
    for _ in range(n_trials):
        t = sc.sample_block(cfg, pilots, gammas, None, 0, rng)
        total += np.sum(np.abs(t.received) ** 2)
    assert abs(total / n_trials - expected) < 0.05 * expected


def test_sample_block_channel_gain_scaling():
    cfg = sc.ScenarioConfig(
        n_devices=2000, pilot_len=10, n_antennas=4, channel_model="point_mass_radius(0.2)"
    )
    rng = np.random.default_rng(2)
    pilots = sc.generate_pilots(cfg.pilot_len, cfg.n_devices, rng)
    gammas = sc.gamma_vector(sc.place_devices(cfg, rng))
    t = sc.sample_block(cfg, pilots, gammas, None, 0, rng)
    per_entry = np.mean(np.abs(t.channels) ** 2)
    assert abs(per_entry - gammas[0]) < 0.05 * gammas[0]


def test_block_truth_round_trip(tmp_path):
    cfg = sc.ScenarioConfig(n_devices=40, pilot_len=16, n_antennas=2)
    rng = np.random.default_rng(3)
    pilots = sc.generate_pilots(cfg.pilot_len, cfg.n_devices, rng)
    gammas = sc.gamma_vector(sc.place_devices(cfg, rng))
    t = sc.sample_block(cfg, pilots, gammas, None, 5, rng)
    path = tmp_path / "truth.npz"
    sc.save_block_truth(t, path)
    back = sc.load_block_truth(path)
    assert back.block_index == 5
    assert np.array_equal(back.activity, t.activity)
    assert np.array_equal(back.received, t.received)
    assert np.array_equal(back.effective, t.effective)


def test_config_round_trip_and_validation(tmp_path):
    cfg = sc.ScenarioConfig(n_devices=123, persist_prob=0.7)
    path = tmp_path / "cfg.json"
    with open(path, "w") as fh:
        json.dump(sc.config_to_dict(cfg), fh)
    back = sc.load_config(path)
    assert back == cfg
    with open(path, "w") as fh:
        json.dump({"n_devices": 10, "bogus_key": 1}, fh)
    with pytest.raises(sc.ConfigError):
        sc.load_config(path)
    with pytest.raises(sc.ConfigError):
        sc.ScenarioConfig(activity_prob=0.5, persist_prob=0.2)
    with pytest.raises(sc.ConfigError):
        sc.ScenarioConfig(channel_model="free_space")
    with pytest.raises(sc.ConfigError):
        sc.ScenarioConfig(n_devices=0)


def test_rng_substreams_labeled_and_stable():
    a = sc.rng_for(7, 0, 0, "pilots").standard_normal(4)
    b = sc.rng_for(7, 0, 0, "pilots").standard_normal(4)
    c = sc.rng_for(7, 0, 0, "noise").standard_normal(4)
    d = sc.rng_for(7, 1, 0, "pilots").standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    with pytest.raises(KeyError):
        sc.rng_for(7, 0, 0, "unknown_purpose")
