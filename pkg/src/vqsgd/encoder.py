"""Convex decompositions of unit-ball vectors over a point set.

Each encoder returns coefficients ``a`` with ``a >= 0``, ``sum(a) == 1`` and
``sum_i a_i c_i == v``; ``a`` is the sampling distribution of the quantizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BallViolation, DimensionConstraint, MismatchError, NoConvergence
from .hadamard import fwht, is_power_of_two
from .pointset import Family, padded_dimension

BALL_TOL = 1e-9
CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CoeffVector:
    a: np.ndarray
    d: int
    family: Family

    def __len__(self):
        return len(self.a)


def _as_ball_vector(v):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if not norm <= 1.0 + BALL_TOL:
        raise BallViolation(f"||v||_2 = {norm!r} exceeds 1; normalize first")
    return v


def _finalize(a, d, family):
    lowest = a.min()
    if lowest < -CLAMP_TOL:
        raise ArithmeticError(f"negative coefficient {lowest!r}; decomposition is invalid")
    if lowest < 0:
        a = np.maximum(a, 0.0)
        a /= a.sum()
    return CoeffVector(a, d, family)


def encode_cross_polytope(v, scaled=False):
    """Closed-form decomposition over {±√d e_i} (or {±2√d e_i} when scaled).

    Index i < d carries the positive part of v_i, index d+i the negative
    part, and the slack gamma is spread evenly over all 2d points.
    """
    v = _as_ball_vector(v)
    d = len(v)
    denom = (2.0 if scaled else 1.0) * math.sqrt(d)
    gamma = 1.0 - np.abs(v).sum() / denom
    base = gamma / (2 * d)
    a = np.concatenate((np.maximum(v, 0.0), np.maximum(-v, 0.0))) / denom + base
    fam = Family.SCALED_CROSS_POLYTOPE if scaled else Family.CROSS_POLYTOPE
    return _finalize(a, d, fam)


def encode_simplex(v):
    v = _as_ball_vector(v)
    d = len(v)
    a0 = 1.0 / 3.0 - v.sum() / (6.0 * d)
    a = np.empty(d + 1)
    a[0] = a0
    a[1:] = v / (2.0 * d) + 2.0 * a0 / d
    return _finalize(a, d, Family.SIMPLEX)


def encode_hadamard(v):
    """a_i = (1 + h_i.v / (2√d)) / (d+1), all i at once via one transform."""
    v = _as_ball_vector(v)
    d = len(v)
    if not is_power_of_two(d + 1):
        raise DimensionConstraint(f"d+1 must be a power of two, got d={d}; pad first")
    x = np.empty(d + 1)
    x[0] = 1.0
    x[1:] = v / (2.0 * math.sqrt(d))
    a = fwht(x) / (d + 1)
    return _finalize(a, d, Family.HADAMARD)


def encode_reed_muller(v):
    """Split delta = H v / d into positive and negative rows, add uniform slack."""
    v = _as_ball_vector(v)
    d = len(v)
    if not is_power_of_two(d):
        raise DimensionConstraint(f"d must be a power of two, got d={d}; pad first")
    delta = fwht(v) / d
    beta = (1.0 - np.abs(delta).sum()) / (2 * d)
    a = np.concatenate((np.maximum(delta, 0.0), np.maximum(-delta, 0.0))) + beta
    return _finalize(a, d, Family.REED_MULLER)


def encode_iterative(ps, v, max_iters=10_000, tol=1e-6):
    """Decompose v over an explicit point list by Frank-Wolfe with away steps.

    Minimizes ||P^T a - v||^2 over the probability simplex using exact line
    search. Every few iterations the current support is polished by an
    affine least-squares solve, which ends the run as soon as v lies in the
    relative interior of the active face.
    """
    v = _as_ball_vector(v)
    P = np.asarray(ps.points, dtype=float)
    m, n = P.shape
    if len(v) != n:
        raise MismatchError(f"vector has dimension {len(v)}, point set has {n}")

    a = np.zeros(m)
    start = int(np.argmin(np.linalg.norm(P - v, axis=1)))
    a[start] = 1.0
    x = P[start].copy()
    polish_every = max(1, min(n + 1, 25))

    for it in range(max_iters):
        r = x - v
        if np.linalg.norm(r) <= tol:
            return _finalize(a, n, ps.family)
        if it % polish_every == polish_every - 1:
            polished = _polish(P, v, a > 0)
            if polished is not None and np.linalg.norm(P.T @ polished - v) <= tol:
                return _finalize(polished, n, ps.family)
        grad = P @ r
        s = int(np.argmin(grad))
        support = np.flatnonzero(a > 0)
        w = support[int(np.argmax(grad[support]))]
        fw_dir = P[s] - x
        away_dir = x - P[w]
        if -(r @ fw_dir) >= -(r @ away_dir):
            direction, step_max, toward = fw_dir, 1.0, True
        else:
            aw = a[w]
            direction, step_max, toward = away_dir, aw / (1.0 - aw) if aw < 1 else np.inf, False
        dd = direction @ direction
        if dd == 0:
            break
        step = min(step_max, max(0.0, -(r @ direction) / dd))
        if toward:
            a *= 1.0 - step
            a[s] += step
        else:
            a *= 1.0 + step
            a[w] -= step
            if step == step_max:
                a[w] = 0.0
        a[a < 0] = 0.0
        x = P.T @ a

    residual = np.linalg.norm(P.T @ a - v)
    if residual <= tol:
        return _finalize(a / a.sum(), n, ps.family)
    raise NoConvergence(
        f"residual {residual:.3g} > tol {tol:.3g} after {max_iters} iterations; "
        "the point set may not cover the unit ball"
    )


def _polish(P, v, mask):
    # minimum-norm affine solve restricted to the support; accepted only if nonnegative
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return None
    A = np.vstack((P[idx].T, np.ones(len(idx))))
    rhs = np.concatenate((v, [1.0]))
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if sol.min() < -CLAMP_TOL:
        return None
    out = np.zeros(len(P))
    out[idx] = np.maximum(sol, 0.0)
    return out / out.sum()


def pad_to_valid(v, family):
    """Zero-pad v to the family's valid dimension; returns (padded, true_d)."""
    v = np.asarray(v, dtype=float)
    d = len(v)
    n = padded_dimension(family, d)
    if n == d:
        return v, d
    return np.concatenate((v, np.zeros(n - d))), d


def reconstruct(ps, a):
    coeffs = a.a if isinstance(a, CoeffVector) else np.asarray(a, dtype=float)
    if len(coeffs) != ps.m:
        raise MismatchError(f"{len(coeffs)} coefficients for a point set of size {ps.m}")
    return ps.points.T @ coeffs


def encode(ps, v, **kwargs):
    """Dispatch to the family's encoder; ``v`` must live in R^pad_d."""
    v = np.asarray(v, dtype=float)
    if len(v) != ps.pad_d:
        raise MismatchError(f"vector has dimension {len(v)}, point set expects {ps.pad_d}")
    fam = ps.family
    if fam is Family.CROSS_POLYTOPE:
        return encode_cross_polytope(v)
    if fam is Family.SCALED_CROSS_POLYTOPE:
        return encode_cross_polytope(v, scaled=True)
    if fam is Family.SIMPLEX:
        return encode_simplex(v)
    if fam is Family.HADAMARD:
        return encode_hadamard(v)
    if fam is Family.REED_MULLER:
        return encode_reed_muller(v)
    return encode_iterative(ps, v, **kwargs)
