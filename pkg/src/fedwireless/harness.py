"""Experiment orchestration: topology building, runs, sweeps, persistence.

Every run is fully determined by (config, seed).  Per-seed substreams are
derived from fixed stream ids so placement, data, allocation randomness, and
packet-loss draws never interact; algorithms at the same seed share the same
packet-loss stream (common random numbers) which sharpens comparisons.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, replace

import numpy as np

from . import assignment, bounds, training
from .config import ExperimentConfig
from .phy import UserProfile

__all__ = [
    "RunRecord",
    "place_users",
    "build_users",
    "build_topology",
    "compute_allocation",
    "resolve_learning_rate",
    "run_experiment",
    "sweep",
    "export_csv",
    "read_csv_rows",
    "write_manifest",
    "load_manifest",
    "bound_report",
]

# Substream ids: seed -> (placement, data, allocation, packet loss).
_STREAM_PLACEMENT = 0
_STREAM_DATA = 1
_STREAM_ALLOCATION = 2
_STREAM_TRANSMIT = 3

CSV_HEADER = "algorithm,seed,round,loss,bound,allocation_digest"


def place_users(rng, count, radius_m):
    """Distances of users dropped uniformly over a disc of the given radius.

    Density proportional to d (area-uniform); distances lie in (0, radius].
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    u = 1.0 - rng.random(count)          # in (0, 1] so distances stay positive
    return radius_m * np.sqrt(u)


def build_users(config: ExperimentConfig, distances):
    counts = config.sample_counts()
    return [
        UserProfile(
            distance_m=float(d),
            sample_count=counts[i],
            fading_scale=config.fading_scale,
            payload_bits=config.payload_bits,
            cpu_cycles_per_bit=config.cpu_cycles_per_bit,
            cpu_freq_hz=config.cpu_freq_hz,
            energy_coeff=config.energy_coeff,
        )
        for i, d in enumerate(distances)
    ]


def build_topology(config: ExperimentConfig, seed: int):
    """Users and dataset for one seed (identical across algorithms)."""
    placement_rng = np.random.default_rng([seed, _STREAM_PLACEMENT])
    distances = place_users(placement_rng, config.user_count, config.cell_radius_m)
    users = build_users(config, distances)
    data_rng = np.random.default_rng([seed, _STREAM_DATA])
    dataset = training.generate_regression_data(
        data_rng,
        config.sample_counts(),
        slope=config.slope,
        intercept=config.intercept,
        noise_std=config.noise_std,
    )
    return users, dataset


def compute_allocation(algorithm, users, config, seed, edges=None):
    """Dispatch one allocation algorithm; edges may be shared across calls."""
    params, fexp = config.network, config.fading
    if edges is None and algorithm in ("proposed", "baseline_a", "baseline_c"):
        edges = assignment.build_edge_weights(users, params, fexp)
    if algorithm == "proposed":
        return assignment.hungarian_assign(edges)
    if algorithm == "baseline_a":
        rng = np.random.default_rng([seed, _STREAM_ALLOCATION])
        return assignment.baseline_optselect_randomrb(rng, users, params, fexp, edges=edges)
    if algorithm == "baseline_b":
        rng = np.random.default_rng([seed, _STREAM_ALLOCATION])
        return assignment.baseline_random_all(rng, users, params, fexp)
    if algorithm == "baseline_c":
        return assignment.baseline_min_sum_per(users, params, fexp, edges=edges)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def resolve_learning_rate(config: ExperimentConfig, dataset) -> float:
    if config.learning_rate == "one_over_L":
        return 1.0 / bounds.curvature(dataset).lipschitz_l
    return float(config.learning_rate)


@dataclass
class RunRecord:
    """One (algorithm, seed) cell: allocation summary plus the loss trajectory."""

    algorithm: str
    seed: int
    selection: list
    rb_index: list            # assigned RB per user, -1 if unselected
    power_w: list
    error_rate: list
    delay_s: list
    energy_j: list
    objective: float
    solver_iterations: int
    losses: list              # length rounds+1, entry 0 is the initial loss
    final_loss: float
    learning_rate: float
    wall_clock_s: float
    bound: list | None = None

    def allocation_digest(self) -> str:
        parts = [
            ",".join(str(int(a)) for a in self.selection),
            ",".join(str(int(r)) for r in self.rb_index),
            ",".join(repr(float(p)) for p in self.power_w),
        ]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "selection": [int(a) for a in self.selection],
            "rb_index": [int(r) for r in self.rb_index],
            "power_w": [float(p) for p in self.power_w],
            "error_rate": [float(q) for q in self.error_rate],
            "delay_s": [float(d) for d in self.delay_s],
            "energy_j": [float(e) for e in self.energy_j],
            "objective": float(self.objective),
            "solver_iterations": int(self.solver_iterations),
            "losses": [float(v) for v in self.losses],
            "final_loss": float(self.final_loss),
            "learning_rate": float(self.learning_rate),
            "wall_clock_s": float(self.wall_clock_s),
            "bound": None if self.bound is None else [float(v) for v in self.bound],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(**data)


def _record_from_run(algorithm, seed, decision, outcomes, learning_rate, wall_clock_s):
    rb_index = [
        int(np.argmax(row)) if row.any() else -1 for row in np.asarray(decision.rb_assignment)
    ]
    losses = [outcome.loss for outcome in outcomes]
    return RunRecord(
        algorithm=algorithm,
        seed=int(seed),
        selection=[int(v) for v in decision.selection],
        rb_index=rb_index,
        power_w=[float(v) for v in decision.power_w],
        error_rate=[float(v) for v in decision.error_rate],
        delay_s=[float(v) for v in decision.delay_s],
        energy_j=[float(v) for v in decision.energy_j],
        objective=float(decision.objective),
        solver_iterations=int(decision.solver_iterations),
        losses=losses,
        final_loss=losses[-1],
        learning_rate=float(learning_rate),
        wall_clock_s=float(wall_clock_s),
    )


def run_experiment(config: ExperimentConfig):
    """Run every (algorithm, seed) cell; deterministic order and content.

    A topology where no user is schedulable still produces a record (the
    global model never moves); it is a degenerate run, not an error.
    """
    records = []
    topologies = {}
    for seed in config.seeds:
        users, dataset = build_topology(config, seed)
        edges = assignment.build_edge_weights(users, config.network, config.fading)
        lr = resolve_learning_rate(config, dataset)
        topologies[seed] = (users, dataset, edges, lr)
    for algorithm in config.algorithms:
        for seed in config.seeds:
            users, dataset, edges, lr = topologies[seed]
            start = time.perf_counter()
            decision = compute_allocation(algorithm, users, config, seed, edges=edges)
            transmit_rng = np.random.default_rng([seed, _STREAM_TRANSMIT])
            outcomes = training.run_training(
                dataset, decision, lr, config.rounds, transmit_rng,
                initial_model=np.asarray(config.initial_model),
            )
            elapsed = time.perf_counter() - start
            records.append(
                _record_from_run(algorithm, seed, decision, outcomes, lr, elapsed)
            )
    return records


def sweep(config: ExperimentConfig, axis: str, values):
    """Re-run the experiment along one axis; per-value per-algorithm stats.

    Axes: user_count, rb_count, samples_per_user.  Returns rows of
    {axis, value, algorithm, mean_final_loss, std_final_loss,
    mean_solver_iterations}.
    """
    if not values:
        raise ValueError("values must be non-empty")
    if any(v <= 0 for v in values):
        raise ValueError("values must be positive")
    rows = []
    for value in values:
        if axis == "user_count":
            derived = replace(config, user_count=int(value))
        elif axis == "rb_count":
            base = config.network
            interference = tuple(
                base.uplink_interference_w[i % len(base.uplink_interference_w)]
                for i in range(int(value))
            )
            derived = replace(
                config,
                network=replace(
                    base, rb_count=int(value), uplink_interference_w=interference
                ),
            )
        elif axis == "samples_per_user":
            derived = replace(config, sample_count_cycle=(int(value),))
        else:
            raise ValueError(
                f"unknown axis {axis!r} (use user_count, rb_count, or samples_per_user)"
            )
        records = run_experiment(derived)
        for algorithm in derived.algorithms:
            finals = [r.final_loss for r in records if r.algorithm == algorithm]
            iters = [r.solver_iterations for r in records if r.algorithm == algorithm]
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "algorithm": algorithm,
                    "mean_final_loss": float(np.mean(finals)),
                    "std_final_loss": float(np.std(finals)),
                    "mean_solver_iterations": float(np.mean(iters)),
                }
            )
    return rows


def export_csv(records, path) -> None:
    """Plot-ready long-format CSV: one row per (record, round >= 1).

    The bound column is empty unless a bound series was attached to the
    record; floats are written with repr so re-importing is lossless.
    """
    if not records:
        raise ValueError("records must be non-empty")
    lines = [CSV_HEADER]
    for record in records:
        digest = record.allocation_digest()
        for step in range(1, len(record.losses)):
            bound = ""
            if record.bound is not None and step < len(record.bound):
                bound = repr(float(record.bound[step]))
            lines.append(
                f"{record.algorithm},{record.seed},{step},"
                f"{repr(float(record.losses[step]))},{bound},{digest}"
            )
    payload = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv_rows(path):
    """Read back an exported CSV as a list of typed row dicts."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path} does not carry the expected header {CSV_HEADER!r}")
    rows = []
    for line in lines[1:]:
        algorithm, seed, step, loss, bound, digest = line.split(",")
        rows.append(
            {
                "algorithm": algorithm,
                "seed": int(seed),
                "round": int(step),
                "loss": float(loss),
                "bound": float(bound) if bound else None,
                "allocation_digest": digest,
            }
        )
    return rows


def write_manifest(records, path, config: ExperimentConfig | None = None) -> None:
    """Lossless JSON store of the run records (and optionally the config text)."""
    from .config import serialize_config

    payload = {"records": [record.to_dict() for record in records]}
    if config is not None:
        payload["config"] = serialize_config(config)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1)


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    return [RunRecord.from_dict(item) for item in payload["records"]]


def bound_report(config: ExperimentConfig):
    """Excess-loss bound series versus the measured mean excess loss.

    The topology and dataset come from the first seed; every configured seed
    contributes one training run that differs only in its packet-loss draws,
    matching the analysis where the expectation runs over packet errors.
    One RunRecord per seed is returned with the bound series attached.
    """
    seed0 = config.seeds[0]
    users, dataset = build_topology(config, seed0)
    edges = assignment.build_edge_weights(users, config.network, config.fading)
    decision = assignment.hungarian_assign(edges)
    lr = resolve_learning_rate(config, dataset)
    curv = bounds.curvature(dataset)

    trajectories = []
    records = []
    for seed in config.seeds:
        rng = np.random.default_rng([seed, _STREAM_TRANSMIT])
        start = time.perf_counter()
        outcomes = training.run_training(
            dataset, decision, lr, config.rounds, rng,
            initial_model=np.asarray(config.initial_model),
        )
        trajectories.append(outcomes)
        records.append(
            _record_from_run(
                "proposed", seed, decision, outcomes, lr, time.perf_counter() - start
            )
        )

    g_star = training.least_squares_model(dataset)
    mean_excess = bounds.empirical_gap(trajectories, g_star, dataset)

    all_models = np.vstack(
        [[outcome.global_model for outcome in run] for run in trajectories]
    )
    error_sum = bounds.wireless_error_sum(
        decision.selection, decision.error_rate, dataset.sample_counts
    )
    fit = bounds.fit_gradient_bound(dataset, all_models, error_sum=error_sum, curv=curv)
    initial_gap = trajectories[0][0].loss - training.global_loss(dataset, g_star)
    steps = np.arange(config.rounds + 1)
    series = bounds.bound_series(
        steps, curv, fit,
        decision.selection, decision.error_rate, dataset.sample_counts, initial_gap,
    )
    for record in records:
        record.bound = [float(v) for v in series.per_step_bound]
    return {
        "steps": steps,
        "series": series,
        "mean_excess": mean_excess,
        "curvature": curv,
        "fit": fit,
        "decision": decision,
        "records": records,
    }
