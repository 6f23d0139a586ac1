"""Experiment harness: run scheme chains over multi-block trials and emit
deterministic CSV results plus a JSON manifest.

A scheme is a denoiser family (soft / mmse) crossed with how it uses the
previous block: no_si ignores it, estimated_si conditions on the previous
block's converged statistic rows, perfect_si conditions on genie knowledge
(the true previous activity for the soft family, the true previous signal
observed at the converged noise level for the mmse family). All schemes in
a plan see identical trial data, so per-trial differences are paired.
"""

import csv
import dataclasses
import json
import math
import os

import numpy as np

from . import __version__, kernels, scenario, state_evolution
from .amp_core import DenoiserChoice, DivergenceError, SideInfo, run_block
from .denoiser_soft import varsigma as varsigma_fn
from .detection_metrics import confusion, nmse
from .special_math import inverse_gamma_q

_FAMILIES = ("soft", "mmse")
_SI_MODES = ("no_si", "estimated_si", "perfect_si")

CSV_FIELDS = (
    "trial", "block", "scheme", "si_mode", "L", "M",
    "gate", "p_fa", "p_md", "nmse", "tau_hat_sq", "diverged",
)


@dataclasses.dataclass(frozen=True)
class SchemeSpec:
    family: str
    si_mode: str

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.si_mode not in _SI_MODES:
            raise ValueError(f"unknown si_mode {self.si_mode!r}")

    @property
    def name(self):
        return f"{self.family}_{self.si_mode}"


def default_schemes():
    return [SchemeSpec(f, s) for f in _FAMILIES for s in _SI_MODES]


def parse_scheme(name):
    family, _, si_mode = name.partition("_")
    return SchemeSpec(family, si_mode)


@dataclasses.dataclass
class ExperimentPlan:
    config: scenario.ScenarioConfig
    schemes: list
    n_trials: int = 10
    si_gate_pfa: float = 0.1
    op_gate_pfa: float = 0.1
    gate_pfa_grid: tuple = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
    gate_grid: tuple | None = None
    max_iter: int = 50
    tol: float = 1e-6
    onsager: str = "matrix"

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("plan needs at least one scheme")
        names = [s.name for s in self.schemes]
        if len(set(names)) != len(names):
            raise ValueError("scheme names must be unique")
        if not 0.0 < self.si_gate_pfa < 1.0 or not 0.0 < self.op_gate_pfa < 1.0:
            raise ValueError("gate false-alarm rates must be in (0, 1)")


@dataclasses.dataclass
class BlockRecord:
    """Per-block internals kept out of the CSV: what denoiser actually ran,
    the raw statistics and the truth, for tests and gate sweeps."""

    trial: int
    block: int
    scheme: str
    kind: str
    statistics: np.ndarray | None
    truth_activity: np.ndarray
    truth_effective: np.ndarray
    x_hat: np.ndarray | None
    tau_hat_sq: float
    diverged: bool


def pfa_gate(tau_sq, m, pfa):
    """Statistic level whose exceedance rate on an inactive row (noise of
    per-antenna variance tau_sq) equals pfa."""
    return math.sqrt(tau_sq * inverse_gamma_q(m, pfa))


def genie_side_info(truth, gammas, block_index):
    """Side information conditioned on the true previous block: the exact
    effective channel rows with a vanishing noise level, so the Bayesian
    side-information odds saturate to the true previous activity. The soft
    family conditions on the same genie through its forced gate labels."""
    tiny = 1e-6 * float(np.min(gammas))
    return SideInfo(
        si_vectors=truth.effective.copy(),
        tau_prev_sq=tiny,
        block_index=block_index,
    )


def _sample_trial(config, root_seed, trial):
    place = scenario.place_devices(
        config, scenario.rng_for(root_seed, trial, 0, "placement")
    )
    gammas = scenario.gamma_vector(place)
    pilots = scenario.generate_pilots(
        config.pilot_len, config.n_devices,
        scenario.rng_for(root_seed, trial, 0, "pilots"),
    )
    truths = []
    prev = None
    for j in range(config.n_blocks):
        rngs = tuple(
            scenario.rng_for(root_seed, trial, j, p)
            for p in ("activity", "channels", "noise")
        )
        truth = scenario.sample_block(config, pilots, gammas, prev, j, rngs)
        truths.append(truth)
        prev = truth.activity
    return gammas, pilots, truths


def _choice_for_block(plan, scheme, gammas, si, prev_activity):
    cfg = plan.config
    lam = cfg.activity_prob
    alpha = cfg.persist_prob
    beta = cfg.birth_prob
    if scheme.family == "mmse":
        kind = "mmse_si" if si is not None else "mmse_no_si"
        return DenoiserChoice(
            kind=kind, lam=lam, alpha=alpha, beta=beta, gammas=gammas
        )
    if si is None:
        return DenoiserChoice(kind="soft_no_si", lam=lam)
    if scheme.si_mode == "perfect_si":
        return DenoiserChoice(
            kind="soft_si", lam=lam, alpha=alpha, beta=beta,
            varsigma=0.0, si_gate=0.0, forced_prev_active=prev_activity,
        )
    gate = pfa_gate(si.tau_prev_sq, cfg.n_antennas, plan.si_gate_pfa)
    return DenoiserChoice(
        kind="soft_si", lam=lam, alpha=alpha, beta=beta,
        varsigma=plan.si_gate_pfa, si_gate=gate,
    )


def run_chain(plan, scheme, gammas, pilots, truths, root_seed, trial):
    """One scheme through all blocks of one trial. Returns (csv rows,
    BlockRecords). After a diverged block the next block runs without side
    information, then the chain resumes its normal policy."""
    cfg = plan.config
    m = cfg.n_antennas
    rows, records = [], []
    si = None
    prev_activity = None
    for j, truth in enumerate(truths):
        use_si = scheme.si_mode != "no_si" and si is not None
        choice = _choice_for_block(
            plan, scheme, gammas, si if use_si else None,
            prev_activity if use_si else None,
        )
        base = dict(
            trial=trial, block=j, scheme=scheme.name, si_mode=scheme.si_mode,
            L=cfg.pilot_len, M=m,
        )
        try:
            est, si_next = run_block(
                pilots, truth.received, si if use_si else None, choice,
                max_iter=plan.max_iter, tol=plan.tol, onsager=plan.onsager,
                block_index=j,
            )
        except DivergenceError:
            rows.append(dict(
                base, gate=math.nan, p_fa=math.nan, p_md=math.nan,
                nmse=math.nan, tau_hat_sq=math.nan, diverged=1,
            ))
            records.append(BlockRecord(
                trial=trial, block=j, scheme=scheme.name, kind=choice.kind,
                statistics=None, truth_activity=truth.activity,
                truth_effective=truth.effective, x_hat=None,
                tau_hat_sq=math.nan, diverged=True,
            ))
            si = None
            prev_activity = truth.activity
            continue
        gate = pfa_gate(est.tau_hat_sq, m, plan.op_gate_pfa) if est.tau_hat_sq > 0 else 0.0
        p_fa, p_md = confusion(est.statistics > gate, truth.activity)
        rows.append(dict(
            base, gate=gate, p_fa=p_fa, p_md=p_md,
            nmse=nmse(est.x_hat, truth.effective),
            tau_hat_sq=est.tau_hat_sq, diverged=0,
        ))
        records.append(BlockRecord(
            trial=trial, block=j, scheme=scheme.name, kind=choice.kind,
            statistics=est.statistics, truth_activity=truth.activity,
            truth_effective=truth.effective, x_hat=est.x_hat,
            tau_hat_sq=est.tau_hat_sq, diverged=False,
        ))
        if scheme.si_mode == "no_si":
            si = None
        elif scheme.si_mode == "estimated_si":
            si = si_next
        else:
            si = genie_side_info(truth, gammas, j)
        prev_activity = truth.activity
    return rows, records


def run_experiment(plan, root_seed=None, with_records=False):
    """All trials x schemes x blocks. Every scheme sees the same trial data.
    Row order: trial ascending, then plan scheme order, then block."""
    root_seed = plan.config.rng_seed if root_seed is None else root_seed
    rows, records = [], []
    for trial in range(plan.n_trials):
        gammas, pilots, truths = _sample_trial(plan.config, root_seed, trial)
        for scheme in plan.schemes:
            r, rec = run_chain(plan, scheme, gammas, pilots, truths, root_seed, trial)
            rows.extend(r)
            records.extend(rec)
    return (rows, records) if with_records else rows


def roc_rows(plan, root_seed=None):
    """One row per (trial, scheme, block, gate): confusion rates across the
    plan's gate grid. Gates come from gate_grid when set, otherwise from the
    false-alarm grid applied to each block's converged noise level."""
    root_seed = plan.config.rng_seed if root_seed is None else root_seed
    _, records = run_experiment(plan, root_seed, with_records=True)
    out = []
    for rec in records:
        if rec.diverged:
            continue
        if plan.gate_grid is not None:
            gates = [float(g) for g in plan.gate_grid]
        else:
            gates = [
                pfa_gate(rec.tau_hat_sq, plan.config.n_antennas, p)
                for p in plan.gate_pfa_grid
            ]
        for gate in gates:
            p_fa, p_md = confusion(rec.statistics > gate, rec.truth_activity)
            out.append(dict(
                trial=rec.trial, block=rec.block, scheme=rec.scheme,
                si_mode=parse_scheme(rec.scheme).si_mode,
                L=plan.config.pilot_len, M=plan.config.n_antennas,
                gate=gate, p_fa=p_fa, p_md=p_md, nmse=math.nan,
                tau_hat_sq=rec.tau_hat_sq, diverged=0,
            ))
    return out


def nmse_sweep(plan, pilot_lengths, root_seed=None):
    """Concatenated experiment rows across a pilot-length grid."""
    rows = []
    for l in pilot_lengths:
        cfg = dataclasses.replace(plan.config, pilot_len=int(l))
        sub = dataclasses.replace(plan, config=cfg)
        rows.extend(run_experiment(sub, root_seed))
    return rows


def se_problem_from_config(config, gammas):
    return state_evolution.SeProblem(
        sigma_z_sq=scenario.noise_variance(config),
        n_over_l=config.n_devices / config.pilot_len,
        m=config.n_antennas,
        lam=config.activity_prob,
        alpha=config.persist_prob,
        beta=config.birth_prob,
        gammas=np.asarray(gammas, dtype=float),
    )


def se_chain(problem, family, si_mode, n_blocks, si_gate_pfa=0.1, seed=0,
             n_reps=20, max_iter=50, tol=1e-3):
    """State evolution run block by block, feeding each block's fixed point
    into the next block's side-information model."""
    if family not in _FAMILIES or si_mode not in _SI_MODES:
        raise ValueError("unknown family or si_mode")
    traces = []
    si_model = None
    for j in range(n_blocks):
        use_si = si_mode != "no_si" and si_model is not None
        kind = f"{family}_si" if use_si else f"{family}_no_si"
        rng = np.random.default_rng((seed, 5, j))
        trace = state_evolution.run_se(
            problem, kind, si_model if use_si else None,
            seed=rng, n_reps=n_reps, max_iter=max_iter, tol=tol,
        )
        traces.append(trace)
        tau_inf = trace.tau_sq[-1]
        if si_mode == "no_si":
            si_model = None
        elif si_mode == "estimated_si":
            if family == "soft":
                gate = pfa_gate(tau_inf, problem.m, si_gate_pfa)
                si_model = state_evolution.SiModel(
                    tau_prev_sq=tau_inf, gate=gate, varsigma=si_gate_pfa
                )
            else:
                si_model = state_evolution.SiModel(tau_prev_sq=tau_inf)
        else:
            if family == "soft":
                si_model = state_evolution.SiModel(
                    tau_prev_sq=0.0, gate=0.0, varsigma=0.0
                )
            else:
                tiny = 1e-6 * float(np.min(problem.gammas))
                si_model = state_evolution.SiModel(tau_prev_sq=tiny)
    return traces


def _format_value(key, value):
    if key in ("trial", "block", "L", "M", "diverged"):
        return str(int(value))
    if key in ("scheme", "si_mode"):
        return str(value)
    return "%.12g" % float(value)


def plan_to_dict(plan):
    return {
        "config": scenario.config_to_dict(plan.config),
        "schemes": [s.name for s in plan.schemes],
        "n_trials": plan.n_trials,
        "si_gate_pfa": plan.si_gate_pfa,
        "op_gate_pfa": plan.op_gate_pfa,
        "gate_pfa_grid": list(plan.gate_pfa_grid),
        "gate_grid": None if plan.gate_grid is None else list(plan.gate_grid),
        "max_iter": plan.max_iter,
        "tol": plan.tol,
        "onsager": plan.onsager,
    }


def emit_results(rows, out_dir, plan, root_seed, basename="results"):
    """Write <basename>.csv and <basename>_manifest.json. Byte-deterministic
    for a given (rows, plan, root_seed)."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{basename}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in rows:
            writer.writerow([_format_value(k, row[k]) for k in CSV_FIELDS])
    manifest = {
        "plan": plan_to_dict(plan),
        "root_seed": int(root_seed),
        "version": __version__,
        "backend": kernels.get_backend(),
        "n_rows": len(rows),
    }
    manifest_path = os.path.join(out_dir, f"{basename}_manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, manifest_path
