"""Command line front end for the simulation harness.

Subcommands:
  simulate    multi-block trials for the selected schemes -> results.csv
  roc         detection operating points over a gate grid -> roc.csv
  nmse-sweep  the simulate rows across a pilot-length grid -> nmse_sweep.csv
  se-trace    per-block state evolution traces -> se_trace.csv

Every run writes a manifest JSON next to the CSV recording the plan, the
seed, the package version and the active kernel backend.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__, harness, kernels, scenario


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _add_common(parser):
    parser.add_argument("--config", help="scenario config JSON path")
    parser.add_argument("--seed", type=int, help="root seed override")
    parser.add_argument("--trials", type=int, help="number of trials")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--scheme", action="append", dest="schemes", metavar="NAME",
        choices=[s.name for s in harness.default_schemes()],
        help="scheme to run (repeatable; default: all six)",
    )


def _build_plan(args, **overrides):
    config = scenario.load_config(args.config) if args.config else scenario.ScenarioConfig()
    if args.seed is not None:
        config = scenario.config_from_dict(
            {**scenario.config_to_dict(config), "rng_seed": args.seed}
        )
    schemes = (
        [harness.parse_scheme(n) for n in args.schemes]
        if args.schemes
        else harness.default_schemes()
    )
    plan = harness.ExperimentPlan(config=config, schemes=schemes, **overrides)
    if args.trials is not None:
        plan.n_trials = args.trials
    return plan


def _cmd_simulate(args):
    plan = _build_plan(args, si_gate_pfa=args.si_pfa, op_gate_pfa=args.op_pfa)
    rows = harness.run_experiment(plan)
    harness.emit_results(rows, args.out, plan, plan.config.rng_seed)
    return 0


def _cmd_roc(args):
    overrides = {}
    if args.pfa_grid:
        overrides["gate_pfa_grid"] = _parse_floats(args.pfa_grid)
    if args.gate_grid:
        overrides["gate_grid"] = _parse_floats(args.gate_grid)
    plan = _build_plan(args, **overrides)
    rows = harness.roc_rows(plan)
    harness.emit_results(rows, args.out, plan, plan.config.rng_seed, basename="roc")
    return 0


def _cmd_nmse_sweep(args):
    plan = _build_plan(args)
    rows = harness.nmse_sweep(plan, _parse_ints(args.lengths))
    harness.emit_results(
        rows, args.out, plan, plan.config.rng_seed, basename="nmse_sweep"
    )
    return 0


def _cmd_se_trace(args):
    plan = _build_plan(args)
    config = plan.config
    gammas = scenario.gamma_vector(
        scenario.place_devices(
            config, scenario.rng_for(config.rng_seed, 0, 0, "placement")
        )
    )
    problem = harness.se_problem_from_config(config, gammas)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "se_trace.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scheme", "block", "t", "tau_sq"])
        for scheme in plan.schemes:
            traces = harness.se_chain(
                problem, scheme.family, scheme.si_mode, config.n_blocks,
                si_gate_pfa=plan.si_gate_pfa, seed=config.rng_seed,
                n_reps=args.reps,
            )
            for j, trace in enumerate(traces):
                for t, tau_sq in enumerate(trace.tau_sq):
                    writer.writerow(
                        [scheme.name, str(j), str(t), "%.12g" % tau_sq]
                    )
    manifest = {
        "plan": harness.plan_to_dict(plan),
        "root_seed": int(config.rng_seed),
        "version": __version__,
        "backend": kernels.get_backend(),
        "se_reps": args.reps,
    }
    with open(os.path.join(args.out, "se_trace_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tcamp",
        description="joint activity detection and channel estimation simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run scheme chains over trials")
    _add_common(p_sim)
    p_sim.add_argument("--si-pfa", type=float, default=0.1,
                       help="false-alarm rate of the side-information gate")
    p_sim.add_argument("--op-pfa", type=float, default=0.1,
                       help="false-alarm rate of the reported operating gate")
    p_sim.set_defaults(func=_cmd_simulate)

    p_roc = sub.add_parser("roc", help="sweep detection gates")
    _add_common(p_roc)
    p_roc.add_argument("--pfa-grid", help="comma separated false-alarm rates")
    p_roc.add_argument("--gate-grid", help="comma separated absolute gates")
    p_roc.set_defaults(func=_cmd_roc)

    p_nmse = sub.add_parser("nmse-sweep", help="sweep pilot lengths")
    _add_common(p_nmse)
    p_nmse.add_argument("--lengths", required=True,
                        help="comma separated pilot lengths")
    p_nmse.set_defaults(func=_cmd_nmse_sweep)

    p_se = sub.add_parser("se-trace", help="state evolution traces per block")
    _add_common(p_se)
    p_se.add_argument("--reps", type=int, default=50,
                      help="Monte Carlo population repetitions per step")
    p_se.set_defaults(func=_cmd_se_trace)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
