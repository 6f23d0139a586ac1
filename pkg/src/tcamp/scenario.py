"""Synthetic uplink scenario: cell geometry, Markov device activity, Rayleigh
channels and the per-block received signal.

Activity is a two-state Markov chain per device. With marginal activity rate
lam and persistence alpha = P(active | active), stationarity forces the
birth rate beta = P(active | inactive) to lam * (1 - alpha) / (1 - lam), so
every block has the same marginal rate.

All randomness flows through labeled substreams of one root seed so that any
trial/block/purpose draw is reproducible in isolation.
"""

import dataclasses
import json
import math
import re

import numpy as np

MIN_DISTANCE_KM = 0.01  # devices closer than 10 m to the BS are excluded

_PURPOSES = {
    "placement": 0,
    "pilots": 1,
    "activity": 2,
    "channels": 3,
    "noise": 4,
    "se": 5,
    "perfect_si": 6,
}


class ConfigError(ValueError):
    pass


def derive_beta(activity_prob, persist_prob):
    """Stationary birth rate beta = lam (1 - alpha) / (1 - lam)."""
    lam, alpha = activity_prob, persist_prob
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"activity_prob must be in (0, 1), got {lam}")
    if not lam <= alpha <= 1.0:
        raise ConfigError(f"persist_prob must be in [activity_prob, 1], got {alpha}")
    return lam * (1.0 - alpha) / (1.0 - lam)


@dataclasses.dataclass
class ScenarioConfig:
    n_devices: int = 500
    n_antennas: int = 2
    pilot_len: int = 150
    n_blocks: int = 10
    activity_prob: float = 0.1
    persist_prob: float = 0.55
    cell_radius_m: float = 500.0
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -169.0
    bandwidth_hz: float = 1.0e7
    rng_seed: int = 1234
    channel_model: str = "rayleigh_pathloss"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_devices < 1 or self.pilot_len < 1 or self.n_antennas < 1:
            raise ConfigError("n_devices, pilot_len and n_antennas must be >= 1")
        if self.n_blocks < 1:
            raise ConfigError("n_blocks must be >= 1")
        derive_beta(self.activity_prob, self.persist_prob)
        if self.cell_radius_m <= MIN_DISTANCE_KM * 1000.0:
            raise ConfigError("cell_radius_m must exceed the 10 m exclusion radius")
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz must be positive")
        _parse_channel_model(self.channel_model)

    @property
    def birth_prob(self):
        return derive_beta(self.activity_prob, self.persist_prob)


def _parse_channel_model(spec_str):
    """Channel model is one of 'rayleigh_pathloss', 'unit_rayleigh',
    'point_mass_radius(<km>)'. Returns (kind, radius_km_or_None)."""
    if spec_str in ("rayleigh_pathloss", "unit_rayleigh"):
        return spec_str, None
    m = re.fullmatch(r"point_mass_radius\(([0-9.eE+-]+)\)", spec_str)
    if m:
        r = float(m.group(1))
        if not r >= MIN_DISTANCE_KM:
            raise ConfigError(f"point mass radius {r} km is below the 10 m exclusion")
        return "point_mass_radius", r
    raise ConfigError(f"unknown channel_model {spec_str!r}")


def rng_for(root_seed, trial, block, purpose):
    """Generator for one labeled substream of the root seed."""
    code = _PURPOSES[purpose]
    ss = np.random.SeedSequence((int(root_seed), int(trial), int(block), code))
    return np.random.default_rng(ss)


def noise_variance(config):
    """Post-normalization noise variance.

    Transmit powers are absorbed into the channel gains, so the per-entry
    noise variance is (PSD * bandwidth) / tx_power in linear units:
    10 ** ((noise_psd_dbm_hz + 10 log10(bandwidth_hz) - tx_power_dbm) / 10).
    """
    db = (
        config.noise_psd_dbm_hz
        + 10.0 * math.log10(config.bandwidth_hz)
        - config.tx_power_dbm
    )
    return 10.0 ** (db / 10.0)


def pathloss_gain(distance_km):
    """Linear large-scale gain at a distance, -128.1 - 36.7 log10(d_km) dB."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d <= 0):
        raise ConfigError("distance must be positive")
    db = -128.1 - 36.7 * np.log10(d)
    out = 10.0 ** (db / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclasses.dataclass
class DevicePathloss:
    distance_km: float
    gamma: float


def place_devices(config, rng):
    """Draw per-device large-scale gains for the configured channel model.

    rayleigh_pathloss places devices uniformly over the annulus between the
    10 m exclusion and the cell radius (area-uniform, density prop. to
    distance); unit_rayleigh pins every gain to 1; point_mass_radius(r)
    puts everyone at distance r.
    """
    kind, radius = _parse_channel_model(config.channel_model)
    n = config.n_devices
    if kind == "unit_rayleigh":
        return [DevicePathloss(math.nan, 1.0) for _ in range(n)]
    if kind == "point_mass_radius":
        g = pathloss_gain(radius)
        return [DevicePathloss(radius, g) for _ in range(n)]
    r_max = config.cell_radius_m / 1000.0
    u = rng.uniform(size=n)
    d = np.sqrt(MIN_DISTANCE_KM**2 + (r_max**2 - MIN_DISTANCE_KM**2) * u)
    g = pathloss_gain(d)
    return [DevicePathloss(float(di), float(gi)) for di, gi in zip(d, g)]


def gamma_vector(placements):
    return np.array([p.gamma for p in placements], dtype=float)


def generate_pilots(pilot_len, n_devices, seed):
    """i.i.d. CN(0, 1/L) pilot matrix of shape (L, N), so unit column energy
    in expectation. seed may be an int, SeedSequence or Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scale = math.sqrt(0.5 / pilot_len)
    return scale * (
        rng.standard_normal((pilot_len, n_devices))
        + 1j * rng.standard_normal((pilot_len, n_devices))
    )


def initial_activity(n_devices, activity_prob, rng):
    """Stationary start of the chain: i.i.d. Bernoulli(lam)."""
    return rng.uniform(size=n_devices) < activity_prob


def step_activity(prev_activity, activity_prob, persist_prob, rng):
    """Advance the activity chain one block: each active device stays active
    w.p. alpha = persist_prob, each inactive one is born w.p. the stationary
    beta. alpha = beta = lam makes blocks independent; alpha = 1 freezes the
    activity pattern."""
    beta = derive_beta(activity_prob, persist_prob)
    prev = np.asarray(prev_activity, dtype=bool)
    u = rng.uniform(size=prev.shape)
    return np.where(prev, u < persist_prob, u < beta)


def _complex_normal(rng, shape, variance_per_entry):
    s = math.sqrt(variance_per_entry / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclasses.dataclass
class BlockTruth:
    block_index: int
    activity: np.ndarray  # (N,) bool
    channels: np.ndarray  # (N, M) complex, CN(0, gamma_n I) rows
    effective: np.ndarray  # (N, M), activity * channels
    received: np.ndarray  # (L, M)


def sample_block(config, pilots, gammas, prev_activity, block_index, rng):
    """Draw one coherence block: advance activity, redraw channels, add noise.

    pilots is shared across blocks; gammas is the per-device gain vector for
    this trial. prev_activity None means this is the first block.
    rng covers activity, channels and noise for the block (callers that need
    finer-grained substreams can pass a tuple (rng_act, rng_chan, rng_noise)).
    """
    if isinstance(rng, tuple):
        rng_act, rng_chan, rng_noise = rng
    else:
        rng_act = rng_chan = rng_noise = rng
    n, m = config.n_devices, config.n_antennas
    if prev_activity is None:
        activity = initial_activity(n, config.activity_prob, rng_act)
    else:
        activity = step_activity(
            prev_activity, config.activity_prob, config.persist_prob, rng_act
        )
    gam = np.asarray(gammas, dtype=float)
    channels = _complex_normal(rng_chan, (n, m), 1.0) * np.sqrt(gam)[:, None]
    effective = np.where(activity[:, None], channels, 0.0 + 0.0j)
    noise = _complex_normal(rng_noise, (pilots.shape[0], m), noise_variance(config))
    received = pilots @ effective + noise
    return BlockTruth(
        block_index=block_index,
        activity=activity,
        channels=channels,
        effective=effective,
        received=received,
    )


def save_block_truth(truth, path):
    """Dump a BlockTruth to a .npz archive (arrays under their field names)."""
    np.savez_compressed(
        path,
        block_index=np.array(truth.block_index),
        activity=truth.activity,
        channels=truth.channels,
        effective=truth.effective,
        received=truth.received,
    )


def load_block_truth(path):
    with np.load(path) as z:
        return BlockTruth(
            block_index=int(z["block_index"]),
            activity=z["activity"].astype(bool),
            channels=z["channels"],
            effective=z["effective"],
            received=z["received"],
        )


def load_config(path):
    """Read a ScenarioConfig from a JSON file keyed by field names."""
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw):
    fields = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(raw) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ScenarioConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config):
    return dataclasses.asdict(config)
