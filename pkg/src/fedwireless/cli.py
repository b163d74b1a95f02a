"""Command-line interface.

Subcommands: simulate (full runs to CSV + manifest), assign (print the
allocation table), bound (contraction-bound series vs measurement), sweep
(one axis, aggregated CSV), validate (invariant self-test battery).

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 validation
failure, 5 training divergence.  The FEDWIRELESS_OUTDIR environment variable
overrides the output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import assignment, bounds, harness, training
from .config import ConfigError, load_config

OUTDIR_ENV = "FEDWIRELESS_OUTDIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_DIVERGED = 5


def _outdir(args) -> Path:
    path = Path(os.environ.get(OUTDIR_ENV, args.outdir))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    records = harness.run_experiment(config)
    outdir = _outdir(args)
    csv_path = outdir / "runs.csv"
    harness.export_csv(records, csv_path)
    harness.write_manifest(records, outdir / "manifest.json", config=config)
    print(f"wrote {len(records)} runs to {csv_path}")
    for record in records:
        print(
            f"  {record.algorithm:12s} seed={record.seed:<6d} "
            f"final_loss={record.final_loss:.6g} objective={record.objective:.6g}"
        )
    return EXIT_OK


def _cmd_assign(args) -> int:
    config = load_config(args.config)
    for seed in config.seeds:
        users, _ = harness.build_topology(config, seed)
        edges = assignment.build_edge_weights(users, config.network, config.fading)
        decision = assignment.hungarian_assign(edges)
        print(f"seed {seed}: objective={decision.objective:.6g} "
              f"selected={int(np.sum(decision.selection))}/{len(users)}")
        print("  user  samples  sel  rb    power_w      error_rate   delay_s      energy_j")
        for i, user in enumerate(users):
            rb_row = decision.rb_assignment[i]
            rb = int(np.argmax(rb_row)) if rb_row.any() else -1
            print(
                f"  {i:4d} {user.sample_count:4d}  {int(decision.selection[i]):2d} "
                f"{rb:4d}  {decision.power_w[i]:<12.6g} {decision.error_rate[i]:<12.6g} "
                f"{decision.delay_s[i]:<12.6g} {decision.energy_j[i]:<12.6g}"
            )
    return EXIT_OK


def _cmd_bound(args) -> int:
    config = load_config(args.config)
    report = harness.bound_report(config)
    series = report["series"]
    outdir = _outdir(args)
    path = outdir / "bound.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("step,bound,mean_excess_loss\n")
        for step in report["steps"]:
            handle.write(
                f"{step},{repr(float(series.per_step_bound[step]))},"
                f"{repr(float(report['mean_excess'][step]))}\n"
            )
    curv = report["curvature"]
    fit = report["fit"]
    print(f"L={curv.lipschitz_l:.6g} mu={curv.strong_convexity_mu:.6g} "
          f"grad_bound_intercept={fit.intercept:.6g} grad_bound_slope={fit.slope:.6g}")
    print(f"contraction={series.contraction:.6g} "
          f"asymptotic_gap={series.asymptotic_gap:.6g}")
    dominated = bool(np.all(report["mean_excess"] <= series.per_step_bound + 1e-9))
    print(f"bound dominates measurement at every step: {dominated}")
    print(f"wrote {path}")
    return EXIT_OK if dominated else EXIT_VALIDATION


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    values = [int(v) for v in args.values.split(",")]
    rows = harness.sweep(config, args.axis, values)
    outdir = _outdir(args)
    path = outdir / f"sweep_{args.axis}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(
            "axis,value,algorithm,mean_final_loss,std_final_loss,mean_solver_iterations\n"
        )
        for row in rows:
            handle.write(
                f"{row['axis']},{row['value']},{row['algorithm']},"
                f"{repr(row['mean_final_loss'])},{repr(row['std_final_loss'])},"
                f"{repr(row['mean_solver_iterations'])}\n"
            )
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    failures = []

    def check(name, ok):
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    from dataclasses import replace

    rng = np.random.default_rng(0)
    users, dataset = harness.build_topology(config, config.seeds[0])
    params, fexp = config.network, config.fading

    small = replace(
        params, rb_count=5, uplink_interference_w=params.uplink_interference_w[:5]
    )
    edges = assignment.build_edge_weights(users[:5], small, fexp)
    hung = assignment.hungarian_assign(edges)
    brute = assignment.brute_force_assign(edges)
    check("matching optimality (5 users, 5 RBs)", hung.objective == brute.objective)

    from .phy import packet_error_rate, user_energy
    powers = np.sort(rng.uniform(1e-5, params.max_user_power_w, 32))
    q = packet_error_rate(users[0], 0, powers, params, fexp)
    e = user_energy(users[0], 0, powers, params, fexp)
    check("error rate non-increasing in power", bool(np.all(np.diff(q) <= 1e-15)))
    check("energy strictly increasing in power", bool(np.all(np.diff(e) > 0)))

    decision = assignment.hungarian_assign(
        assignment.build_edge_weights(users, params, fexp)
    )
    check("allocation satisfies every gate",
          not assignment.verify_allocation(decision, users, params, fexp))

    lr = harness.resolve_learning_rate(config, dataset)
    run_a = training.run_training(dataset, decision, lr, 10,
                                  np.random.default_rng([1, 3]))
    run_b = training.run_training(dataset, decision, lr, 10,
                                  np.random.default_rng([1, 3]))
    check("training is seed deterministic",
          all(x.loss == y.loss for x, y in zip(run_a, run_b)))

    g_star = training.least_squares_model(dataset)
    check("pooled solution beats the trajectory",
          all(outcome.loss >= training.global_loss(dataset, g_star) for outcome in run_a))

    if failures:
        print(f"{len(failures)} validation failure(s)")
        return EXIT_VALIDATION
    print("all validation checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedwireless",
        description="Simulate and optimize federated learning over a wireless uplink.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the experiment config file")
        p.add_argument("--outdir", default="out", help="output directory (default: out)")
        p.set_defaults(func=func)
        return p

    add("simulate", _cmd_simulate, "run all (algorithm, seed) cells, write CSV + manifest")
    add("assign", _cmd_assign, "print the optimized allocation table per seed")
    add("bound", _cmd_bound, "contraction-bound series vs measured mean excess loss")
    sweep_parser = add("sweep", _cmd_sweep, "sweep one axis and aggregate final losses")
    sweep_parser.add_argument(
        "--axis", required=True, choices=["user_count", "rb_count", "samples_per_user"]
    )
    sweep_parser.add_argument(
        "--values", required=True, help="comma-separated positive integers"
    )
    add("validate", _cmd_validate, "run the invariant self-test battery")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except training.TrainingDiverged as exc:
        print(f"error[divergence]: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
