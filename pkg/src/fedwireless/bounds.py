"""Convergence analysis for the wireless federated training loop.

Evaluates the analytical machinery around the per-step contraction factor:
curvature constants of the pooled objective, an affine bound on per-sample
gradient norms, the per-step upper bound on expected excess loss, its
asymptotic limit, and the gradient-slope range that guarantees contraction
for every feasible allocation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .assignment import _hungarian_square, feasible_power_interval
from .phy import packet_error_rate

__all__ = [
    "CurvatureEstimate",
    "GradientBoundFit",
    "BoundSeries",
    "curvature",
    "fit_gradient_bound",
    "check_gradient_bound",
    "wireless_error_sum",
    "contraction_factor",
    "excess_loss_bound",
    "bound_series",
    "asymptotic_gap",
    "worst_case_error_sum",
    "convergence_slope_limit",
    "slope_guarantees_convergence",
    "empirical_gap",
]


@dataclass(frozen=True)
class CurvatureEstimate:
    """Smoothness and strong-convexity constants of the pooled objective."""

    lipschitz_l: float
    strong_convexity_mu: float

    def __post_init__(self):
        if not 0 < self.strong_convexity_mu <= self.lipschitz_l:
            raise ValueError(
                f"need 0 < mu <= L, got mu={self.strong_convexity_mu}, L={self.lipschitz_l}"
            )


def curvature(dataset) -> CurvatureEstimate:
    """Extreme eigenvalues of the pooled Hessian (1/K) sum_ik x x^T.

    For the linear-regression loss the Hessian is constant, so both constants
    are exact.  Rank-deficient data is rejected: strong convexity is a
    standing assumption of the analysis.
    """
    x, _ = dataset.pooled()
    hessian = (x.T @ x) / dataset.total_samples
    eigenvalues = np.linalg.eigvalsh(hessian)
    lipschitz = float(eigenvalues[-1])
    mu = float(eigenvalues[0])
    if mu <= 1e-12 * max(lipschitz, 1.0):
        raise ValueError(
            "pooled design matrix is rank deficient (mu = 0): strong convexity "
            "does not hold, add non-collinear features or more data"
        )
    return CurvatureEstimate(lipschitz_l=lipschitz, strong_convexity_mu=mu)


@dataclass(frozen=True)
class GradientBoundFit:
    """Affine bound on per-sample gradients over the fitted model set:
    ||grad f_ik(g)||^2 <= intercept + slope * ||grad F(g)||^2."""

    intercept: float
    slope: float
    samples_used: int

    def __post_init__(self):
        if self.intercept < 0 or self.slope < 0:
            raise ValueError("intercept and slope must be >= 0")


def _gradient_norm_profiles(dataset, models):
    """Per-trajectory-point max per-sample gradient norm^2 and global gradient norm^2."""
    models = np.atleast_2d(np.asarray(models, dtype=float))
    x, y = dataset.pooled()
    residuals = x @ models.T - y[:, None]                  # (K, T)
    x_norm2 = np.sum(x * x, axis=1)                        # (K,)
    per_sample_max = np.max(residuals ** 2 * x_norm2[:, None], axis=0)   # (T,)
    grad_f = x.T @ residuals / dataset.total_samples       # (dim, T)
    grad_f_norm2 = np.sum(grad_f ** 2, axis=0)             # (T,)
    return per_sample_max, grad_f_norm2


def fit_gradient_bound(dataset, models, error_sum=None, curv=None, grid_size=33):
    """Fit the (intercept, slope) gradient bound from observed global models.

    For each candidate slope on a grid, the smallest valid intercept is
    max over trajectory points of (max_k ||grad f_k||^2 - slope*||grad F||^2).
    When the wireless error sum and curvature are supplied, the pair
    minimizing the asymptotic excess-loss gap (among pairs that still
    contract) is returned; otherwise slope = 0 with the definitional
    intercept.
    """
    models = np.atleast_2d(np.asarray(models, dtype=float))
    if models.shape[0] < 1:
        raise ValueError("need at least one trajectory point")
    per_sample_max, grad_f_norm2 = _gradient_norm_profiles(dataset, models)
    samples_used = models.shape[0] * dataset.total_samples

    def intercept_for(slope):
        return float(max(0.0, np.max(per_sample_max - slope * grad_f_norm2)))

    if error_sum is None or curv is None or error_sum == 0:
        return GradientBoundFit(
            intercept=intercept_for(0.0), slope=0.0, samples_used=samples_used
        )

    total = dataset.total_samples
    slope_cap = total / (4.0 * error_sum)
    candidates = np.concatenate(
        [[0.0], np.linspace(0.0, slope_cap, grid_size, endpoint=False)[1:]]
    )
    best = None
    for slope in candidates:
        intercept = intercept_for(slope)
        denom = 1.0 - 4.0 * slope * error_sum / total
        if denom <= 0:
            continue
        gap = (
            2.0 * intercept * error_sum / (curv.lipschitz_l * total)
        ) / (curv.strong_convexity_mu / curv.lipschitz_l * denom)
        if best is None or gap < best[0]:
            best = (gap, intercept, float(slope))
    _, intercept, slope = best
    return GradientBoundFit(intercept=intercept, slope=slope, samples_used=samples_used)


def check_gradient_bound(dataset, models, fit) -> bool:
    """Independent pointwise re-check of the fitted gradient inequality."""
    per_sample_max, grad_f_norm2 = _gradient_norm_profiles(dataset, models)
    slack = 1e-9 * (1.0 + np.abs(per_sample_max))
    return bool(np.all(per_sample_max <= fit.intercept + fit.slope * grad_f_norm2 + slack))


def wireless_error_sum(selection, error_rates, sample_counts) -> float:
    """Data-weighted expected loss of local models: the sum over users of
    sample_count * (1 - selected + selected * error_rate)."""
    a = np.asarray(selection, dtype=float)
    q = np.asarray(error_rates, dtype=float)
    k = np.asarray(sample_counts, dtype=float)
    return float(np.sum(k * (1.0 - a + a * q)))


def contraction_factor(selection, error_rates, sample_counts, curv, slope) -> float:
    """Per-step contraction of expected excess loss; < 1 is required to converge."""
    total = float(np.sum(sample_counts))
    s = wireless_error_sum(selection, error_rates, sample_counts)
    ratio = curv.strong_convexity_mu / curv.lipschitz_l
    return 1.0 - ratio + 4.0 * curv.strong_convexity_mu * slope * s / (
        curv.lipschitz_l * total
    )


def excess_loss_bound(
    t, factor, intercept, curv, selection, error_rates, sample_counts, initial_gap
):
    """Upper bound on expected excess loss after t steps.

    factor^t * initial_gap + G * (1 - factor^t) / (1 - factor) with
    G = 2 * intercept * wireless_error_sum / (lipschitz * total_samples).
    Accepts scalar or array t.  factor = 1 degenerates to linear growth
    initial_gap + t*G (flagged with a warning).
    """
    t = np.asarray(t, dtype=float)
    total = float(np.sum(sample_counts))
    s = wireless_error_sum(selection, error_rates, sample_counts)
    per_step = 2.0 * intercept * s / (curv.lipschitz_l * total)
    if factor == 1.0:
        warnings.warn("contraction factor is 1: bound grows linearly", RuntimeWarning)
        result = initial_gap + t * per_step
    else:
        decay = factor ** t
        result = decay * initial_gap + per_step * (1.0 - decay) / (1.0 - factor)
    return float(result) if result.ndim == 0 else result


@dataclass
class BoundSeries:
    """Per-step excess-loss bound for one allocation, plus its inputs."""

    contraction: float
    per_step_bound: np.ndarray
    asymptotic_gap: float
    selection: np.ndarray
    error_rates: np.ndarray
    sample_counts: np.ndarray
    initial_gap: float


def bound_series(steps, curv, fit, selection, error_rates, sample_counts, initial_gap):
    """Evaluate the excess-loss bound over a step range as a BoundSeries."""
    factor = contraction_factor(selection, error_rates, sample_counts, curv, fit.slope)
    series = excess_loss_bound(
        steps, factor, fit.intercept, curv, selection, error_rates, sample_counts,
        initial_gap,
    )
    gap = asymptotic_gap(
        selection, error_rates, sample_counts, curv, fit.intercept, fit.slope
    )
    return BoundSeries(
        contraction=factor,
        per_step_bound=np.asarray(series),
        asymptotic_gap=gap,
        selection=np.asarray(selection),
        error_rates=np.asarray(error_rates),
        sample_counts=np.asarray(sample_counts),
        initial_gap=float(initial_gap),
    )


def asymptotic_gap(selection, error_rates, sample_counts, curv, intercept, slope) -> float:
    """Limit of the excess-loss bound as t grows; inf when contraction fails."""
    total = float(np.sum(sample_counts))
    s = wireless_error_sum(selection, error_rates, sample_counts)
    ratio = curv.strong_convexity_mu / curv.lipschitz_l
    denominator = ratio - 4.0 * curv.strong_convexity_mu * slope * s / (
        curv.lipschitz_l * total
    )
    if denominator <= 0:
        return float("inf")
    return (2.0 * intercept * s / (curv.lipschitz_l * total)) / denominator


def worst_case_error_sum(users, params, fexp) -> float:
    """Largest sample-weighted error-rate sum over feasible allocations.

    The error rate is non-increasing in power, so each edge's worst case is
    attained at its minimum feasible power; the worst assignment is then a
    max-weight matching over those per-edge values.
    """
    n_users, n_rbs = len(users), params.rb_count
    gains = np.zeros((n_users, n_rbs))
    for i, user in enumerate(users):
        for n in range(n_rbs):
            interval = feasible_power_interval(user, n, params, fexp)
            if interval is None:
                continue
            q_worst = packet_error_rate(user, n, interval[0], params, fexp)
            gains[i, n] = user.sample_count * q_worst
    size = max(n_users, n_rbs)
    cost = np.zeros((size, size))
    cost[:n_users, :n_rbs] = -gains
    col_of_row, _ = _hungarian_square(cost, counted_rows=0)
    total = 0.0
    for i in range(n_users):
        n = col_of_row[i]
        if n < n_rbs:
            total += gains[i, n]
    return total


def convergence_slope_limit(users, params, fexp) -> float:
    """Largest gradient-bound slope that keeps the contraction factor below 1
    for every feasible allocation of this topology."""
    worst = worst_case_error_sum(users, params, fexp)
    total = float(sum(u.sample_count for u in users))
    if worst == 0.0:
        return float("inf")
    return total / (4.0 * worst)


def slope_guarantees_convergence(slope, users, params, fexp) -> bool:
    """True when the gradient-bound slope lies strictly below the topology limit."""
    if not slope > 0:
        raise ValueError("slope must be strictly positive")
    return slope < convergence_slope_limit(users, params, fexp)


def empirical_gap(trajectories, optimal_model, dataset):
    """Per-step mean excess loss F(g_t) - F(g*) over seeded runs."""
    from .training import global_loss  # local import avoids a cycle

    if not trajectories:
        raise ValueError("need at least one trajectory")
    optimal_loss = global_loss(dataset, optimal_model)
    lengths = {len(run) for run in trajectories}
    if len(lengths) != 1:
        raise ValueError("all trajectories must have the same length")
    losses = np.array([[outcome.loss for outcome in run] for run in trajectories])
    return losses.mean(axis=0) - optimal_loss
