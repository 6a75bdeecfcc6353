"""Objectives for the simulator: least squares and L2-regularized logistic loss."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import Diverged, ParameterRange


class TaskKind(enum.Enum):
    LEAST_SQUARES = "least_squares"
    LOGISTIC = "logistic"


@dataclass(frozen=True, eq=False)
class Task:
    """A dataset plus objective.

    Least squares: f(θ) = (1/n)||Aθ - b||^2.
    Logistic: f(θ) = (1/n) Σ log(1 + exp(-b_i a_i.θ)) + reg ||θ||^2 with
    reg = 1/(2n), n the full dataset size.
    """

    kind: TaskKind
    features: np.ndarray | sp.csr_matrix
    labels: np.ndarray
    theta_star: np.ndarray | None = None
    reg: float = 0.0

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def loss(self, theta, rows=slice(None)):
        A = self.features[rows]
        b = self.labels[rows]
        z = A @ theta
        if self.kind is TaskKind.LEAST_SQUARES:
            r = z - b
            return float(r @ r) / len(b)
        return float(np.mean(np.logaddexp(0.0, -b * z))) + self.reg * float(theta @ theta)

    def classification_error(self, theta, features=None, labels=None):
        A = self.features if features is None else features
        b = self.labels if labels is None else labels
        pred = np.where(A @ theta >= 0, 1.0, -1.0)
        return float(np.mean(pred != b))


def make_logistic_task(dataset):
    labels = np.asarray(dataset.labels, dtype=float)
    bad = ~np.isin(labels, (-1.0, 1.0))
    if bad.any():
        raise ParameterRange(f"logistic labels must be ±1; found {np.unique(labels[bad])[:5]}")
    return Task(TaskKind.LOGISTIC, dataset.features, labels, None, 1.0 / (2.0 * len(labels)))


def synth_least_squares(n, d, seed):
    """A and θ* with i.i.d. N(0, 1) entries and b = Aθ* (noiseless)."""
    if n < 1 or d < 1:
        raise ParameterRange(f"n and d must be positive, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    theta_star = rng.standard_normal(d)
    return Task(TaskKind.LEAST_SQUARES, A, A @ theta_star, theta_star, 0.0)


def shard_bounds(n, N):
    """Contiguous shards of n // N rows; the last worker also takes the remainder."""
    if N < 1 or n < N:
        raise ParameterRange(f"cannot split {n} rows across {N} workers")
    size = n // N
    return [(k * size, n if k == N - 1 else (k + 1) * size) for k in range(N)]


def local_gradient(task, shard, theta):
    """Gradient of the shard's share of the objective at θ."""
    lo, hi = shard
    if hi <= lo:
        raise ParameterRange("empty shard")
    A = task.features[lo:hi]
    b = task.labels[lo:hi]
    z = A @ theta
    if task.kind is TaskKind.LEAST_SQUARES:
        g = (2.0 / (hi - lo)) * (A.T @ (z - b))
    else:
        w = -b * expit(-b * z)
        g = (A.T @ w) / (hi - lo) + 2.0 * task.reg * theta
    g = np.asarray(g, dtype=float).ravel()
    if not np.all(np.isfinite(g)):
        raise Diverged("non-finite local gradient")
    return g


def full_gradient(task, theta):
    return local_gradient(task, (0, task.n), theta)
