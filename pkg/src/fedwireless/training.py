"""Federated training loop for the linear-regression task.

Each round: broadcast the global model, selected users take one full-batch
gradient step on their own data, uplink packets are lost independently with
each user's packet error rate, and the surviving local models are averaged
with data-size weights.  A round in which nothing arrives leaves the global
model unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "RoundOutcome",
    "TrainingDiverged",
    "generate_regression_data",
    "local_loss_and_gradient",
    "local_update",
    "transmit",
    "aggregate",
    "run_training",
    "global_loss",
    "least_squares_model",
]


class TrainingDiverged(RuntimeError):
    """Raised when the recorded loss stops being finite."""


@dataclass
class Dataset:
    """Per-user feature matrices (with a trailing all-ones bias column) and targets."""

    features: list          # user i -> (samples_i, dim) array
    targets: list           # user i -> (samples_i,) array

    def __post_init__(self):
        if len(self.features) != len(self.targets):
            raise ValueError("features and targets must have one entry per user")
        for i, (x, y) in enumerate(zip(self.features, self.targets)):
            if len(x) != len(y):
                raise ValueError(f"user {i}: {len(x)} feature rows but {len(y)} targets")
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                raise ValueError(f"user {i}: non-finite data")

    @property
    def user_count(self):
        return len(self.features)

    @property
    def sample_counts(self):
        return np.array([len(y) for y in self.targets])

    @property
    def total_samples(self):
        return int(sum(len(y) for y in self.targets))

    def pooled(self):
        """All samples stacked: (X, y) over every user."""
        return np.vstack(self.features), np.concatenate(self.targets)


def generate_regression_data(rng, sample_counts, slope=-2.0, intercept=1.0, noise_std=0.4):
    """Draw each user's samples from y = slope*x + intercept + noise_std*n,
    with x uniform on [0, 1] and n standard normal.

    Features carry an appended constant-1 bias column, so a model vector is
    (slope, intercept).
    """
    features, targets = [], []
    for count in sample_counts:
        x = rng.random(int(count))
        noise = rng.standard_normal(int(count))
        y = slope * x + intercept + noise_std * noise
        features.append(np.column_stack([x, np.ones_like(x)]))
        targets.append(y)
    return Dataset(features, targets)


def local_loss_and_gradient(model, features, targets):
    """Sum-of-squares loss of one user and its exact gradient.

    Loss is sum_k (1/2)(x_k^T w - y_k)^2; the gradient is X^T (Xw - y).
    """
    model = np.asarray(model, dtype=float)
    if features.shape[1] != model.shape[0]:
        raise ValueError(
            f"model dimension {model.shape[0]} != feature dimension {features.shape[1]}"
        )
    residual = features @ model - targets
    loss = 0.5 * float(residual @ residual)
    gradient = features.T @ residual
    return loss, gradient


def local_update(global_model, features, targets, learning_rate):
    """One full-batch gradient step from the broadcast global model."""
    if learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")
    _, gradient = local_loss_and_gradient(global_model, features, targets)
    return np.asarray(global_model, dtype=float) - (learning_rate / len(targets)) * gradient


def transmit(selection, error_rates, rng):
    """Per-user delivery flags: selected users deliver with probability one
    minus their error rate.

    Draws one uniform per user regardless of selection so the random stream
    depends only on the user count.
    """
    selection = np.asarray(selection)
    q = np.asarray(error_rates, dtype=float)
    if np.any(q < 0) or np.any(q > 1):
        raise ValueError("error rates must lie in [0, 1]")
    draws = rng.random(selection.shape[0])
    return (selection == 1) & (draws >= q)


def aggregate(local_models, delivered, sample_counts, previous_global):
    """Data-size-weighted average of the delivered local models.

    Falls back to the previous global model when nothing was delivered.
    """
    delivered = np.asarray(delivered, dtype=bool)
    if not delivered.any():
        return np.asarray(previous_global, dtype=float).copy()
    weights = np.asarray(sample_counts, dtype=float) * delivered
    stacked = np.asarray(local_models, dtype=float)
    return (weights @ stacked) / weights.sum()


def global_loss(dataset, model):
    """Mean loss over the pooled data: (1/K) sum_i sum_k f(w, x_ik, y_ik)."""
    x, y = dataset.pooled()
    residual = x @ np.asarray(model, dtype=float) - y
    return 0.5 * float(residual @ residual) / dataset.total_samples


def least_squares_model(dataset):
    """Closed-form minimizer of the pooled loss via the normal equations."""
    x, y = dataset.pooled()
    return np.linalg.solve(x.T @ x, x.T @ y)


@dataclass
class RoundOutcome:
    """State after one training round (step 0 is the initial model)."""

    step: int
    delivered: np.ndarray    # (U,) bool; always False for unselected users
    global_model: np.ndarray
    loss: float


def run_training(dataset, decision, learning_rate, rounds, rng, initial_model=None):
    """Run the full loop for a fixed allocation; returns one outcome per step.

    The trajectory (including step 0) is fully determined by the dataset,
    the allocation, the learning rate, and the generator state.  Aborts
    with TrainingDiverged if the loss stops being finite.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    n_users = dataset.user_count
    dim = dataset.features[0].shape[1]
    selection = np.asarray(decision.selection)
    error_rates = np.asarray(decision.error_rate, dtype=float)

    # Pooled views let each round run as one matmul plus a segment reduction.
    x_pool, y_pool = dataset.pooled()
    counts = dataset.sample_counts
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])

    g = np.zeros(dim) if initial_model is None else np.asarray(initial_model, dtype=float).copy()
    outcomes = [
        RoundOutcome(
            step=0,
            delivered=np.zeros(n_users, dtype=bool),
            global_model=g.copy(),
            loss=global_loss(dataset, g),
        )
    ]
    selected_idx = np.flatnonzero(selection == 1)
    total = dataset.total_samples
    for step in range(1, rounds + 1):
        residual = x_pool @ g - y_pool
        per_user_grad = np.add.reduceat(x_pool * residual[:, None], offsets, axis=0)
        locals_ = np.tile(g, (n_users, 1))
        if selected_idx.size:
            locals_[selected_idx] -= (
                learning_rate / counts[selected_idx, None]
            ) * per_user_grad[selected_idx]
        delivered = transmit(selection, error_rates, rng)
        g = aggregate(locals_, delivered, counts, g)
        with np.errstate(over="ignore"):   # overflow to inf is the divergence signal
            loss = 0.5 * float(np.sum((x_pool @ g - y_pool) ** 2)) / total
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"loss became non-finite at step {step} (learning_rate={learning_rate})"
            )
        outcomes.append(
            RoundOutcome(step=step, delivered=delivered, global_model=g.copy(), loss=loss)
        )
    return outcomes
