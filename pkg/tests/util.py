"""Shared helpers for the test suite."""

from itertools import combinations, permutations

import numpy as np

from fedwireless.assignment import EdgeWeightMatrix
from fedwireless.phy import NetworkParams, UserProfile


def synthetic_edges(rng, n_users, n_rbs, feasible_prob=0.85, p_max=0.01):
    """A random but internally consistent edge matrix (weights = K*(q-1))."""
    counts = rng.integers(1, 13, n_users).astype(float)
    q = rng.random((n_users, n_rbs))
    # occasionally pin q to 1 so weight-0 feasible edges get exercised
    q[rng.random((n_users, n_rbs)) < 0.05] = 1.0
    feasible = rng.random((n_users, n_rbs)) < feasible_prob
    weights = np.where(feasible, counts[:, None] * (q - 1.0), 0.0)
    return EdgeWeightMatrix(
        weights=weights,
        feasible=feasible,
        power_w=np.where(feasible, p_max, 0.0),
        error_rate=np.where(feasible, q, 1.0),
        delay_s=np.where(feasible, 0.1, np.inf),
        energy_j=np.where(feasible, 1e-3, np.inf),
        sample_counts=counts,
    )


def oracle_min_matching_sum(weights):
    """Exhaustive minimum matching sum via combinations x permutations.

    Independent of the package's own enumeration; exponential, keep sizes <= 5.
    """
    n_users, n_rbs = weights.shape
    best = 0.0
    for k in range(1, min(n_users, n_rbs) + 1):
        for rows in combinations(range(n_users), k):
            for cols in permutations(range(n_rbs), k):
                total = sum(weights[r, c] for r, c in zip(rows, cols))
                best = min(best, total)
    return best


def manual_decision(selection, error_rates, n_rbs=None):
    """AllocationDecision with prescribed selection and error rates (for the
    training loop, which only reads those two fields)."""
    from fedwireless.assignment import AllocationDecision

    selection = np.asarray(selection, dtype=int)
    error_rates = np.asarray(error_rates, dtype=float)
    n_users = selection.shape[0]
    if n_rbs is None:
        n_rbs = n_users
    rb = np.zeros((n_users, n_rbs), dtype=int)
    for i in range(n_users):
        if selection[i]:
            rb[i, i % n_rbs] = 1
    return AllocationDecision(
        selection=selection,
        rb_assignment=rb,
        power_w=np.full(n_users, 0.01) * selection,
        objective=0.0,
        error_rate=error_rates * selection,
        delay_s=np.zeros(n_users),
        energy_j=np.zeros(n_users),
    )


def table_topology(seed=7, n_users=15, interference=None, radius=500.0):
    """Users placed like the reference experiment (standard constants)."""
    if interference is None:
        interference = tuple(np.logspace(-9, -7, 12))
    params = NetworkParams(uplink_interference_w=tuple(interference))
    rng = np.random.default_rng([seed, 0])
    u = 1.0 - rng.random(n_users)
    distances = radius * np.sqrt(u)
    cycle = [12, 10, 8, 4, 2]
    users = [
        UserProfile(distance_m=float(d), sample_count=cycle[i % 5])
        for i, d in enumerate(distances)
    ]
    return users, params
