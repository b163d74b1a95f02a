"""Allocation tests: optimal power, edge gating, matching, baselines."""

import numpy as np
import pytest

from fedwireless.assignment import (
    AllocationDecision,
    EdgeWeightMatrix,
    baseline_min_sum_per,
    baseline_optselect_randomrb,
    baseline_random_all,
    brute_force_assign,
    build_edge_weights,
    edge_weight,
    feasible_power_interval,
    hungarian_assign,
    optimal_power,
    verify_allocation,
)
from fedwireless.phy import (
    FadingExpectation,
    NetworkParams,
    UserProfile,
    packet_error_rate,
    training_energy,
    uplink_delay,
    downlink_delay,
    user_energy,
)

from util import oracle_min_matching_sum, synthetic_edges, table_topology

QUAD = FadingExpectation()


def user_at(distance, samples=12, **kwargs):
    return UserProfile(distance_m=distance, sample_count=samples, **kwargs)


class TestOptimalPower:
    def test_loose_budget_gives_max_power(self):
        params = NetworkParams(energy_budget_j=1e6)
        opt = optimal_power(user_at(300.0), 0, params, QUAD)
        assert opt.power_w == params.max_user_power_w
        assert opt.feasible_energy is True

    def test_training_energy_consuming_whole_budget(self):
        user = user_at(100.0)
        params = NetworkParams(energy_budget_j=training_energy(user))
        assert optimal_power(user, 0, params, QUAD).feasible_energy is False

    def test_matches_grid_search(self):
        # 10^4-point grid oracle: P* within one grid step of the best grid power.
        rng = np.random.default_rng(3)
        params = NetworkParams(uplink_interference_w=tuple(np.logspace(-8, -6.5, 12)))
        grid = np.linspace(params.max_user_power_w / 1e4, params.max_user_power_w, 10**4)
        step = grid[1] - grid[0]
        for _ in range(10):
            user = user_at(float(rng.uniform(50, 500)))
            rb = int(rng.integers(0, 12))
            opt = optimal_power(user, rb, params, QUAD)
            energies = user_energy(user, rb, grid, params, QUAD)
            feasible = grid[energies <= params.energy_budget_j]
            if not opt.feasible_energy:
                assert feasible.size == 0
                continue
            assert feasible.size > 0
            assert abs(opt.power_w - feasible.max()) <= step

    def test_energy_at_returned_power_within_budget(self):
        params = NetworkParams(uplink_interference_w=(8e-8,) * 12)
        for d in (100.0, 300.0, 500.0):
            opt = optimal_power(user_at(d), 0, params, QUAD)
            if opt.feasible_energy:
                e = user_energy(user_at(d), 0, opt.power_w, params, QUAD)
                assert e <= params.energy_budget_j + 1e-9


class TestFeasiblePowerInterval:
    def test_interval_respects_both_gates(self):
        params = NetworkParams(uplink_interference_w=(5e-8,) * 12)
        user = user_at(400.0)
        interval = feasible_power_interval(user, 0, params, QUAD)
        assert interval is not None
        lo, hi = interval
        assert 0 < lo <= hi <= params.max_user_power_w
        down = downlink_delay(user, params, QUAD)
        assert uplink_delay(user, 0, lo, params, QUAD) + down <= params.delay_budget_s * (1 + 1e-9)
        assert user_energy(user, 0, hi, params, QUAD) <= params.energy_budget_j + 1e-9

    def test_returns_none_when_energy_infeasible(self):
        user = user_at(100.0)
        params = NetworkParams(energy_budget_j=training_energy(user) * 0.5)
        assert feasible_power_interval(user, 0, params, QUAD) is None

    def test_returns_none_when_delay_unreachable(self):
        params = NetworkParams(delay_budget_s=1e-6)
        assert feasible_power_interval(user_at(500.0), 0, params, QUAD) is None


class TestEdgeWeight:
    def test_error_certain_link_is_worthless(self):
        # Feasible edge with q that floors to exactly 1: weight ties with infeasible.
        fexp = FadingExpectation(point_mass=1.0)
        params = NetworkParams(
            uplink_interference_w=(1.0,) * 12,
            delay_budget_s=1e9,
            energy_budget_j=1e9,
        )
        user = user_at(500.0, samples=10, payload_bits=1.0)
        assert packet_error_rate(user, 0, 0.01, params, fexp) == 1.0
        assert edge_weight(user, 0, params, fexp) == 0.0

    def test_perfect_link_contributes_minus_k(self):
        # q is negligible on a near-noiseless point-mass channel, so the
        # weight rounds to exactly minus the sample count.
        fexp = FadingExpectation(point_mass=1.0)
        params = NetworkParams()
        user = user_at(1e-3, samples=12)
        assert packet_error_rate(user, 0, 0.01, params, fexp) < 1e-18
        assert edge_weight(user, 0, params, fexp) == -12.0

    def test_infeasible_edge_disabled(self):
        user = user_at(100.0)
        params = NetworkParams(energy_budget_j=training_energy(user))
        assert edge_weight(user, 0, params, QUAD) == 0.0

    def test_weight_tracks_per_oracle(self):
        mc = FadingExpectation(method="monte_carlo", node_or_sample_count=10**6, seed=20240915)
        params = NetworkParams()
        user = user_at(100.0, samples=12)
        got = edge_weight(user, 0, params, QUAD)
        opt = optimal_power(user, 0, params, QUAD)
        q_mc = packet_error_rate(user, 0, opt.power_w, params, mc)
        assert got == pytest.approx(12.0 * (q_mc - 1.0), abs=12e-3)

    def test_build_matches_scalar_op(self):
        users, params = table_topology(seed=5, n_users=4)
        edges = build_edge_weights(users, params, QUAD)
        for i, user in enumerate(users):
            for n in (0, 5, 11):
                assert edges.weights[i, n] == edge_weight(user, n, params, QUAD)

    def test_weights_bounded_by_sample_count(self):
        users, params = table_topology(seed=9)
        edges = build_edge_weights(users, params, QUAD)
        counts = edges.sample_counts[:, None]
        assert np.all(edges.weights <= 0)
        assert np.all(edges.weights >= -counts)


class TestHungarian:
    def test_single_edge(self):
        rng = np.random.default_rng(0)
        edges = synthetic_edges(rng, 1, 1, feasible_prob=1.0)
        edges.weights[0, 0] = -5.0
        edges.error_rate[0, 0] = 1.0 - 5.0 / edges.sample_counts[0]
        decision = hungarian_assign(edges)
        assert decision.selection.tolist() == [1]
        assert decision.rb_assignment[0, 0] == 1
        assert decision.objective == pytest.approx(edges.sample_counts[0] - 5.0)

    def test_all_zero_weights_select_nobody(self):
        edges = synthetic_edges(np.random.default_rng(1), 4, 3, feasible_prob=0.0)
        decision = hungarian_assign(edges)
        assert decision.selection.sum() == 0
        assert decision.objective == pytest.approx(edges.sample_counts.sum())

    def test_matches_independent_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            n_users = int(rng.integers(1, 6))
            n_rbs = int(rng.integers(1, 6))
            edges = synthetic_edges(rng, n_users, n_rbs)
            decision = hungarian_assign(edges)
            matched_sum = decision.objective - edges.sample_counts.sum()
            assert matched_sum == pytest.approx(oracle_min_matching_sum(edges.weights), abs=1e-12)

    def test_matches_brute_force_objective_exactly(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n_users = int(rng.integers(1, 7))
            n_rbs = int(rng.integers(1, 7))
            edges = synthetic_edges(rng, n_users, n_rbs)
            assert hungarian_assign(edges).objective == brute_force_assign(edges).objective

    def test_matches_scipy_reference(self):
        from scipy.optimize import linear_sum_assignment

        rng = np.random.default_rng(4)
        for _ in range(40):
            edges = synthetic_edges(rng, int(rng.integers(2, 9)), int(rng.integers(2, 9)))
            rows, cols = linear_sum_assignment(edges.weights)
            reference = edges.weights[rows, cols].sum()
            decision = hungarian_assign(edges)
            matched_sum = decision.objective - edges.sample_counts.sum()
            assert matched_sum == pytest.approx(min(reference, 0.0), abs=1e-12)

    def test_deterministic(self):
        edges = synthetic_edges(np.random.default_rng(5), 6, 6)
        first = hungarian_assign(edges)
        second = hungarian_assign(edges)
        assert np.array_equal(first.rb_assignment, second.rb_assignment)
        assert first.objective == second.objective

    def test_infeasible_match_reported_unselected(self):
        edges = synthetic_edges(np.random.default_rng(6), 3, 5, feasible_prob=0.4)
        decision = hungarian_assign(edges)
        for i in range(3):
            if decision.selection[i]:
                n = int(np.argmax(decision.rb_assignment[i]))
                assert edges.feasible[i, n]
                assert edges.weights[i, n] < 0


class TestBruteForce:
    def test_two_by_two_by_hand(self):
        edges = synthetic_edges(np.random.default_rng(0), 2, 2, feasible_prob=1.0)
        edges.weights[:] = [[-1.0, -4.0], [-3.0, -2.0]]
        edges.error_rate[:] = 1.0 + edges.weights / edges.sample_counts[:, None]
        decision = brute_force_assign(edges)
        assert decision.rb_assignment[0, 1] == 1
        assert decision.rb_assignment[1, 0] == 1
        matched_sum = decision.objective - edges.sample_counts.sum()
        assert matched_sum == pytest.approx(-7.0)

    def test_size_guard(self):
        edges = synthetic_edges(np.random.default_rng(1), 9, 3)
        with pytest.raises(ValueError):
            brute_force_assign(edges)

    def test_rectangular_self_consistency(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            edges = synthetic_edges(rng, 5, 7)
            assert brute_force_assign(edges).objective == hungarian_assign(edges).objective


class TestPowerOptimality:
    def test_error_rate_minimized_at_optimal_power(self):
        rng = np.random.default_rng(11)
        params = NetworkParams(uplink_interference_w=tuple(np.logspace(-8, -6.8, 12)))
        grid = np.linspace(params.max_user_power_w / 1e4, params.max_user_power_w, 10**4)
        for _ in range(10):
            user = user_at(float(rng.uniform(50, 500)))
            rb = int(rng.integers(0, 12))
            opt = optimal_power(user, rb, params, QUAD)
            if not opt.feasible_energy:
                continue
            energies = user_energy(user, rb, grid, params, QUAD)
            feasible = grid[energies <= params.energy_budget_j]
            q_star = packet_error_rate(user, rb, opt.power_w, params, QUAD)
            q_grid = packet_error_rate(user, rb, feasible, params, QUAD)
            assert np.all(q_star <= q_grid + 1e-15)


class TestBaselines:
    def test_single_feasible_edge_selected_by_everyone(self):
        users = [user_at(150.0, samples=9)]
        params = NetworkParams(rb_count=1, uplink_interference_w=(1e-9,))
        edges = build_edge_weights(users, params, QUAD)
        assert hungarian_assign(edges).selection.tolist() == [1]
        assert baseline_min_sum_per(users, params, QUAD, edges=edges).selection.tolist() == [1]
        a = baseline_optselect_randomrb(np.random.default_rng(0), users, params, QUAD, edges=edges)
        assert a.selection.tolist() == [1]
        b = baseline_random_all(np.random.default_rng(0), users, params, QUAD)
        assert b.selection.tolist() == [1]

    def test_all_infeasible_selects_nobody(self):
        users = [user_at(100.0), user_at(200.0)]
        params = NetworkParams(energy_budget_j=training_energy(users[0]) * 0.9)
        edges = build_edge_weights(users, params, QUAD)
        assert hungarian_assign(edges).selection.sum() == 0
        assert baseline_min_sum_per(users, params, QUAD, edges=edges).selection.sum() == 0
        a = baseline_optselect_randomrb(np.random.default_rng(1), users, params, QUAD, edges=edges)
        assert a.selection.sum() == 0
        b = baseline_random_all(np.random.default_rng(1), users, params, QUAD)
        assert b.selection.sum() == 0

    def test_all_satisfy_allocation_invariants(self):
        for seed in range(6):
            users, params = table_topology(seed=seed)
            edges = build_edge_weights(users, params, QUAD)
            rng = np.random.default_rng([seed, 2])
            decisions = [
                hungarian_assign(edges),
                baseline_optselect_randomrb(rng, users, params, QUAD, edges=edges),
                baseline_random_all(rng, users, params, QUAD),
                baseline_min_sum_per(users, params, QUAD, edges=edges),
            ]
            for decision in decisions:
                assert verify_allocation(decision, users, params, QUAD) == []

    def test_proposed_dominates_every_baseline(self):
        for seed in range(20):
            users, params = table_topology(seed=100 + seed)
            edges = build_edge_weights(users, params, QUAD)
            rng = np.random.default_rng([seed, 2])
            proposed = hungarian_assign(edges).objective
            a = baseline_optselect_randomrb(rng, users, params, QUAD, edges=edges).objective
            b = baseline_random_all(rng, users, params, QUAD).objective
            c = baseline_min_sum_per(users, params, QUAD, edges=edges).objective
            assert proposed <= a + 1e-12
            assert proposed <= b + 1e-12
            assert proposed <= c + 1e-12

    def test_seed42_golden_allocations(self):
        # First-run golden capture on the reference topology, seed 42.
        users, params = table_topology(seed=42)
        edges = build_edge_weights(users, params, QUAD)
        proposed = hungarian_assign(edges)
        rng = np.random.default_rng([42, 2])
        a = baseline_optselect_randomrb(rng, users, params, QUAD, edges=edges)
        b = baseline_random_all(rng, users, params, QUAD)
        c = baseline_min_sum_per(users, params, QUAD, edges=edges)
        golden = GOLDEN_SEED42
        assert proposed.selection.tolist() == golden["proposed_selection"]
        assert proposed.objective == pytest.approx(golden["proposed_objective"], rel=1e-12)
        assert a.selection.tolist() == golden["a_selection"]
        assert b.selection.tolist() == golden["b_selection"]
        assert c.selection.tolist() == golden["c_selection"]
        assert a.objective == pytest.approx(golden["a_objective"], rel=1e-12)
        assert b.objective == pytest.approx(golden["b_objective"], rel=1e-12)
        assert c.objective == pytest.approx(golden["c_objective"], rel=1e-12)


GOLDEN_SEED42 = {
    "proposed_selection": [1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0],
    "proposed_objective": 6.883190159273236,
    "a_selection": [1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0],
    "a_objective": 7.988070428001853,
    "b_selection": [1, 1, 1, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1],
    "b_objective": 37.26306914565862,
    "c_selection": [1, 1, 1, 1, 0, 1, 1, 1, 0, 1, 0, 1, 1, 1, 1],
    "c_objective": 18.90225684984582,
}
