"""Joint user selection, resource-block assignment, and transmit power.

The proposed allocator computes a per-edge optimal power (largest power that
respects the energy budget), gates each (user, RB) edge on the delay and
energy budgets, and solves a min-weight bipartite matching with a Hungarian
solver.  Three reference baselines and an exhaustive matching oracle are
included for comparison and testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phy import (
    NetworkParams,
    UserProfile,
    FadingExpectation,
    expected_uplink_rate,
    downlink_delay,
    uplink_delay,
    packet_error_rate,
    training_energy,
    user_energy,
)

__all__ = [
    "OptimalPower",
    "EdgeWeightMatrix",
    "AllocationDecision",
    "optimal_power",
    "feasible_power_interval",
    "edge_weight",
    "build_edge_weights",
    "hungarian_assign",
    "brute_force_assign",
    "baseline_random_all",
    "baseline_optselect_randomrb",
    "baseline_min_sum_per",
    "verify_allocation",
]

_BISECT_ITERS = 200


@dataclass(frozen=True)
class OptimalPower:
    """Result of the per-edge power search."""

    power_w: float
    feasible_energy: bool


def optimal_power(user, rb_index, params, fexp) -> OptimalPower:
    """Largest transmit power on one RB that respects the energy budget.

    Returns the device power cap or, if that violates the energy budget,
    the power at which the per-round energy meets the budget exactly; the
    bisection exploits that energy is strictly increasing in power and
    always lands on the feasible side of the root.  feasible_energy is
    False when even a vanishing transmit power (or training alone) exceeds
    the budget.
    """
    budget = params.energy_budget_j
    if training_energy(user) >= budget:
        return OptimalPower(0.0, False)
    p_max = params.max_user_power_w
    if user_energy(user, rb_index, p_max, params, fexp) <= budget:
        return OptimalPower(p_max, True)
    lo = p_max * 1e-12
    if user_energy(user, rb_index, lo, params, fexp) > budget:
        # Transmit energy per bit does not vanish with P; no feasible power.
        return OptimalPower(0.0, False)
    hi = p_max
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if user_energy(user, rb_index, mid, params, fexp) <= budget:
            lo = mid
        else:
            hi = mid
    return OptimalPower(lo, True)


def _min_power_for_rate(user, rb_index, target_rate, p_hi, params, fexp):
    """Smallest power in (0, p_hi] whose expected rate reaches target_rate.

    Returns None when even p_hi falls short.  The returned power sits on the
    feasible side (rate >= target).
    """
    if expected_uplink_rate(user, rb_index, p_hi, params, fexp) < target_rate:
        return None
    lo, hi = p_hi * 1e-15, p_hi
    if expected_uplink_rate(user, rb_index, lo, params, fexp) >= target_rate:
        return lo
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if expected_uplink_rate(user, rb_index, mid, params, fexp) >= target_rate:
            hi = mid
        else:
            lo = mid
    return hi


def feasible_power_interval(user, rb_index, params, fexp):
    """Power interval [P_lo, P_hi] where both the delay and energy gates hold.

    Returns None when the edge is infeasible at any power.
    """
    opt = optimal_power(user, rb_index, params, fexp)
    if not opt.feasible_energy:
        return None
    down = downlink_delay(user, params, fexp)
    slack = params.delay_budget_s - down
    if slack <= 0:
        return None
    if user.payload_bits == 0:
        return (opt.power_w * 1e-15, opt.power_w)
    target_rate = user.payload_bits / slack
    p_lo = _min_power_for_rate(user, rb_index, target_rate, opt.power_w, params, fexp)
    if p_lo is None:
        return None
    return (p_lo, opt.power_w)


def edge_weight(user, rb_index, params, fexp) -> float:
    """Matching weight of one (user, RB) edge: sample_count * (error_rate - 1)
    if the edge is feasible at its optimal power, else 0 (edge disabled)."""
    opt = optimal_power(user, rb_index, params, fexp)
    if not opt.feasible_energy:
        return 0.0
    total_delay = uplink_delay(user, rb_index, opt.power_w, params, fexp) + downlink_delay(
        user, params, fexp
    )
    if total_delay > params.delay_budget_s:
        return 0.0
    q = packet_error_rate(user, rb_index, opt.power_w, params, fexp)
    return user.sample_count * (q - 1.0)


@dataclass
class EdgeWeightMatrix:
    """Per-edge quantities for all (user, RB) pairs at the optimal power."""

    weights: np.ndarray          # (U, R), samples*(error-1) on feasible edges, else 0
    feasible: np.ndarray         # (U, R) bool
    power_w: np.ndarray          # (U, R) optimal power per edge
    error_rate: np.ndarray       # (U, R) packet error rate at the optimal power
    delay_s: np.ndarray          # (U, R) uplink + downlink delay at the optimal power
    energy_j: np.ndarray         # (U, R) energy at the optimal power
    sample_counts: np.ndarray    # (U,)


def build_edge_weights(users, params, fexp) -> EdgeWeightMatrix:
    """Evaluate optimal power, gates, and weight for every (user, RB) edge."""
    n_users, n_rbs = len(users), params.rb_count
    shape = (n_users, n_rbs)
    weights = np.zeros(shape)
    feasible = np.zeros(shape, dtype=bool)
    power = np.zeros(shape)
    error = np.ones(shape)
    delay = np.full(shape, np.inf)
    energy = np.full(shape, np.inf)
    for i, user in enumerate(users):
        down = downlink_delay(user, params, fexp)
        for n in range(n_rbs):
            opt = optimal_power(user, n, params, fexp)
            if not opt.feasible_energy:
                continue
            p = opt.power_w
            total_delay = uplink_delay(user, n, p, params, fexp) + down
            e = user_energy(user, n, p, params, fexp)
            if total_delay > params.delay_budget_s or e > params.energy_budget_j:
                continue
            q = packet_error_rate(user, n, p, params, fexp)
            feasible[i, n] = True
            power[i, n] = p
            error[i, n] = q
            delay[i, n] = total_delay
            energy[i, n] = e
            weights[i, n] = user.sample_count * (q - 1.0)
    sample_counts = np.array([u.sample_count for u in users], dtype=float)
    return EdgeWeightMatrix(weights, feasible, power, error, delay, energy, sample_counts)


@dataclass
class AllocationDecision:
    """A full allocation: selection, RB matrix, powers, and per-user link stats.

    The objective sums sample_count * (1 - selected + selected * error_rate)
    over users: the data-weighted
    expected loss of local models (unselected users count as always lost).
    """

    selection: np.ndarray        # (U,) 0/1
    rb_assignment: np.ndarray    # (U, R) 0/1
    power_w: np.ndarray          # (U,)
    objective: float
    error_rate: np.ndarray       # (U,) per-user packet error rate (0 if unselected)
    delay_s: np.ndarray          # (U,) uplink + downlink delay (0 if unselected)
    energy_j: np.ndarray         # (U,) per-round energy (0 if unselected)
    solver_iterations: int = 0


def _finalize_decision(sample_counts, n_rbs, entries, solver_iterations=0):
    """Assemble an AllocationDecision from (user, rb, power, q, delay, energy) rows."""
    n_users = len(sample_counts)
    selection = np.zeros(n_users, dtype=int)
    rb_assignment = np.zeros((n_users, n_rbs), dtype=int)
    power = np.zeros(n_users)
    error = np.zeros(n_users)
    delay = np.zeros(n_users)
    energy = np.zeros(n_users)
    for i, n, p, q, d, e in entries:
        selection[i] = 1
        rb_assignment[i, n] = 1
        power[i] = p
        error[i] = q
        delay[i] = d
        energy[i] = e
    counts = np.asarray(sample_counts, dtype=float)
    objective = float(np.sum(counts * (1.0 - selection + selection * error)))
    return AllocationDecision(
        selection=selection,
        rb_assignment=rb_assignment,
        power_w=power,
        objective=objective,
        error_rate=error,
        delay_s=delay,
        energy_j=energy,
        solver_iterations=solver_iterations,
    )


def _entries_from_edges(edges, pairs):
    return [
        (i, n, edges.power_w[i, n], edges.error_rate[i, n],
         edges.delay_s[i, n], edges.energy_j[i, n])
        for i, n in pairs
    ]


def _hungarian_square(cost: np.ndarray, counted_rows: int):
    """Min-cost perfect matching on a square matrix via the potentials method.

    Returns (col_of_row, iterations) where iterations counts the column
    settles performed while inserting the first ``counted_rows`` rows (the
    rows that correspond to real users; padding rows are excluded from the
    count but still matched).
    """
    n = cost.shape[0]
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)      # match[j] = row currently assigned to column j (1-based)
    way = [0] * (n + 1)
    iterations = 0
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = 0
            row = cost[i0 - 1]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if i <= counted_rows:
                iterations += 1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    col_of_row = [-1] * n
    for j in range(1, n + 1):
        if match[j] > 0:
            col_of_row[match[j] - 1] = j - 1
    return col_of_row, iterations


def _solve_matching(weight_matrix, counted_rows):
    """Min-weight matching of a (U, R) matrix padded to a zero-cost square."""
    n_users, n_rbs = weight_matrix.shape
    n = max(n_users, n_rbs)
    cost = np.zeros((n, n))
    cost[:n_users, :n_rbs] = weight_matrix
    col_of_row, iterations = _hungarian_square(cost, counted_rows=counted_rows)
    pairs = []
    for i in range(n_users):
        n_rb = col_of_row[i]
        if n_rb < n_rbs and weight_matrix[i, n_rb] < 0.0:
            pairs.append((i, n_rb))
    return pairs, iterations


def hungarian_assign(edges: EdgeWeightMatrix) -> AllocationDecision:
    """Globally optimal allocation: min-weight matching over feasible edges.

    The weight matrix is padded to a square with zero-cost dummies, so
    leaving a user unmatched is always available at cost 0.  Users matched
    through a weight-0 edge (infeasible, or error-certain) are reported
    unselected; the objective is unchanged by that convention.
    """
    pairs, iterations = _solve_matching(edges.weights, counted_rows=edges.weights.shape[0])
    return _finalize_decision(
        edges.sample_counts,
        edges.weights.shape[1],
        _entries_from_edges(edges, pairs),
        solver_iterations=iterations,
    )


def brute_force_assign(edges: EdgeWeightMatrix) -> AllocationDecision:
    """Exhaustive matching oracle: enumerates every injective partial
    assignment of users to RBs and returns a global minimizer.

    Refuses instances beyond 8x8 (factorial blowup guard).
    """
    n_users, n_rbs = edges.weights.shape
    if n_users > 8 or n_rbs > 8:
        raise ValueError(f"brute_force_assign limited to 8x8 instances, got {n_users}x{n_rbs}")
    weights = edges.weights
    best_total = [np.inf]
    best_pairs = [()]

    def search(i, used_mask, total, pairs):
        if i == n_users:
            if total < best_total[0]:
                best_total[0] = total
                best_pairs[0] = pairs
            return
        for n in range(n_rbs):
            if not used_mask & (1 << n):
                search(i + 1, used_mask | (1 << n), total + weights[i, n], pairs + ((i, n),))
        search(i + 1, used_mask, total, pairs)

    search(0, 0, 0.0, ())
    pairs = [(i, n) for (i, n) in best_pairs[0] if weights[i, n] < 0.0]
    return _finalize_decision(
        edges.sample_counts, n_rbs, _entries_from_edges(edges, pairs)
    )


def baseline_random_all(rng, users, params, fexp) -> AllocationDecision:
    """Baseline b: uniformly random user selection, RB matching, and powers.

    Powers are drawn uniformly from each edge's feasible interval; pairs
    with no feasible power are dropped so the output always satisfies the
    delay and energy gates.
    """
    n_users, n_rbs = len(users), params.rb_count
    k = min(n_users, n_rbs)
    chosen_users = rng.permutation(n_users)[:k]
    chosen_rbs = rng.permutation(n_rbs)[:k]
    entries = []
    for i, n in zip(chosen_users, chosen_rbs):
        i, n = int(i), int(n)
        interval = feasible_power_interval(users[i], n, params, fexp)
        if interval is None:
            continue
        p = float(rng.uniform(interval[0], interval[1]))
        entries.append(_evaluate_entry(users[i], i, n, p, params, fexp))
    counts = [u.sample_count for u in users]
    return _finalize_decision(counts, n_rbs, entries)


def _evaluate_entry(user, i, n, power, params, fexp):
    q = packet_error_rate(user, n, power, params, fexp)
    delay = uplink_delay(user, n, power, params, fexp) + downlink_delay(user, params, fexp)
    energy = user_energy(user, n, power, params, fexp)
    return (i, n, power, q, delay, energy)


def baseline_optselect_randomrb(rng, users, params, fexp, edges=None) -> AllocationDecision:
    """Baseline a: random RB order, optimal powers, greedy selection by data size.

    Users ranked by descending sample count take RBs in the random order;
    users beyond the RB supply, or whose assigned edge is infeasible at its
    optimal power, stay unselected.
    """
    n_users, n_rbs = len(users), params.rb_count
    if edges is None:
        edges = build_edge_weights(users, params, fexp)
    rb_order = rng.permutation(n_rbs)
    user_order = sorted(range(n_users), key=lambda i: (-users[i].sample_count, i))
    pairs = []
    for rank, i in enumerate(user_order):
        if rank >= n_rbs:
            break
        n = int(rb_order[rank])
        if edges.feasible[i, n]:
            pairs.append((i, n))
    return _finalize_decision(
        edges.sample_counts, n_rbs, _entries_from_edges(edges, pairs)
    )


def baseline_min_sum_per(users, params, fexp, edges=None) -> AllocationDecision:
    """Baseline c: minimize the unweighted sum of packet error rates.

    Identical machinery to the proposed allocator but with edge weights
    (error_rate - 1) instead of sample_count * (error_rate - 1): agnostic
    to how much data each user
    holds.  Unselected users count as an error rate of 1.
    """
    if edges is None:
        edges = build_edge_weights(users, params, fexp)
    per_weights = np.where(edges.feasible, edges.error_rate - 1.0, 0.0)
    pairs, iterations = _solve_matching(per_weights, counted_rows=per_weights.shape[0])
    return _finalize_decision(
        edges.sample_counts,
        per_weights.shape[1],
        _entries_from_edges(edges, pairs),
        solver_iterations=iterations,
    )


def verify_allocation(decision, users, params, fexp, energy_slack_j=1e-9):
    """Re-evaluate every constraint of an allocation; returns violation strings.

    Checks the one-RB-per-user and one-user-per-RB structure, the power box
    constraint, and the delay/energy gates recomputed from the PHY model at
    the recorded powers.  An empty list means the allocation is valid.
    """
    problems = []
    n_users, n_rbs = len(users), params.rb_count
    sel = np.asarray(decision.selection)
    rb = np.asarray(decision.rb_assignment)
    if rb.shape != (n_users, n_rbs):
        return [f"rb_assignment shape {rb.shape} != ({n_users}, {n_rbs})"]
    if not np.array_equal(rb.sum(axis=1), sel):
        problems.append("sum_n r[i,n] != a[i] for some user")
    if np.any(rb.sum(axis=0) > 1):
        problems.append("some RB assigned to more than one user")
    if np.any(decision.power_w < 0) or np.any(
        decision.power_w > params.max_user_power_w * (1 + 1e-12)
    ):
        problems.append("power outside [0, P_max]")
    for i in range(n_users):
        if not sel[i]:
            continue
        n = int(np.argmax(rb[i]))
        p = float(decision.power_w[i])
        if p <= 0:
            problems.append(f"user {i} selected with zero power")
            continue
        total_delay = uplink_delay(users[i], n, p, params, fexp) + downlink_delay(
            users[i], params, fexp
        )
        if total_delay > params.delay_budget_s * (1 + 1e-12):
            problems.append(f"user {i} violates delay budget: {total_delay:.6g}")
        energy = user_energy(users[i], n, p, params, fexp)
        if energy > params.energy_budget_j + energy_slack_j:
            problems.append(f"user {i} violates energy budget: {energy:.6g}")
    return problems
