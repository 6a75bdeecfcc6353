"""Covering checks for point sets and the communication lower bound.

A point set C satisfies B(0,1) ⊆ conv(C) exactly when every unit direction x
has some c ∈ C with <x, c> >= 1. Checking this on a finite set of directions
is evidence; on an eps-net with covering radius eps it becomes a proof once
the margin reaches 1 + eps*R, since moving x by at most eps changes <x, c>
by at most eps*R.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterRange
from .nets import unit_grid
from .pointset import build_gaussian
from .quantizer import _generator

PASS_TOL = 1e-9
MAX_RANDOM_DIRECTIONS = 1_000_000
_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class DirectionNet:
    """Unit directions plus the covering radius they certify (if any)."""

    directions: np.ndarray
    eps: float
    certified: bool

    def __len__(self):
        return len(self.directions)


@dataclass(frozen=True, eq=False)
class CoveringReport:
    min_max_inner: float
    worst_direction: np.ndarray
    n_directions: int
    passed: bool
    criterion: str
    certified: bool
    certificate_threshold: float | None = None
    norm_violations: int | None = None

    @property
    def pass_(self):
        return self.passed

    def to_dict(self):
        out = {
            "min_max_inner": round(float(self.min_max_inner), 12),
            "worst_direction": [round(float(x), 12) for x in self.worst_direction],
            "n_directions": int(self.n_directions),
            "pass": bool(self.passed),
            "criterion": self.criterion,
            "certified": bool(self.certified),
            "certificate_threshold": (
                None if self.certificate_threshold is None
                else round(float(self.certificate_threshold), 12)
            ),
        }
        if self.norm_violations is not None:
            out["norm_violations"] = int(self.norm_violations)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def make_direction_net(d, eps, seed=None):
    """Deterministic eps-grid for d <= 3, otherwise a random spot-check sample."""
    if d < 2:
        raise ParameterRange(f"direction nets need d >= 2, got {d}")
    if d <= 3:
        return DirectionNet(unit_grid(d, eps), eps, True)
    n = min(MAX_RANDOM_DIRECTIONS, math.ceil(min((3.0 / eps) ** d, 1e18)))
    return DirectionNet(random_directions(d, n, seed), eps, False)


def random_directions(d, n, rng=None):
    z = _generator(rng).standard_normal((int(n), d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def verify_covering(ps, directions):
    """Evaluate min over directions of max over points of <x, c>.

    ``directions`` is a :class:`DirectionNet` or an array of unit vectors;
    plain arrays are treated as non-certifying spot checks.
    """
    if isinstance(directions, DirectionNet):
        X, eps, certifying = directions.directions, directions.eps, directions.certified
    else:
        X, eps, certifying = np.asarray(directions, dtype=float), None, False
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("verify_covering needs a non-empty (n, d) array of directions")
    norms = np.linalg.norm(X, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise ValueError("directions must be unit vectors")
    P = np.asarray(ps.points, dtype=float)
    if X.shape[1] != P.shape[1]:
        raise ValueError(f"directions live in R^{X.shape[1]}, points in R^{P.shape[1]}")

    best_val, best_idx = math.inf, 0
    for start in range(0, len(X), _CHUNK):
        block = X[start:start + _CHUNK] @ P.T
        row_max = block.max(axis=1)
        j = int(np.argmin(row_max))
        if row_max[j] < best_val:
            best_val, best_idx = float(row_max[j]), start + j

    threshold = None
    certified = False
    if certifying:
        threshold = 1.0 + eps * ps.R
        certified = best_val >= threshold
    return CoveringReport(
        min_max_inner=best_val,
        worst_direction=X[best_idx].copy(),
        n_directions=len(X),
        passed=best_val >= 1.0 - PASS_TOL,
        criterion="net-certificate" if certifying else "spot-check",
        certified=certified,
        certificate_threshold=threshold,
    )


def lower_bound_bits(d, R):
    """log2 of the minimum point-set size for covering with circumradius R."""
    if R < 1:
        raise ParameterRange(f"R must be >= 1, got {R}")
    return max(0.0, d / (32.0 * R * R * math.log(2.0)) - 1.0)


def check_gaussian_construction(d, R, seed, override=None, n_directions=100_000, rng=None, **kw):
    """Build a Gaussian point set and spot-check its covering and norms."""
    ps = build_gaussian(d, R, seed, override, **kw)
    X = random_directions(d, n_directions, rng)
    report = verify_covering(ps, X)
    violations = int(np.sum(ps.sq_norms > R * R))
    return CoveringReport(
        report.min_max_inner, report.worst_direction, report.n_directions,
        report.passed, report.criterion, report.certified, None, violations,
    )
