"""Structured point sets whose convex hulls contain the unit ball.

Every family here satisfies ``B(0, 1) ⊂ conv(C) ⊆ B(0, R)``. Structured
families decode index -> point from a closed form; the Gaussian and eps-net
families carry an explicit point list.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    CardinalityOverflow,
    DimensionConstraint,
    InvalidDimension,
    ParameterRange,
    UnsupportedDimension,
)
from .hadamard import is_power_of_two, next_power_of_two
from .nets import unit_grid

DEFAULT_MAX_POINTS = 1_000_000


class Family(enum.IntEnum):
    """Point-set families. The integer value is the one-byte wire id."""

    CROSS_POLYTOPE = 0
    SCALED_CROSS_POLYTOPE = 1
    SIMPLEX = 2
    HADAMARD = 3
    REED_MULLER = 4
    GAUSSIAN = 5
    EPS_NET = 6

    @property
    def short_name(self):
        return _SHORT_NAMES[self]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        key = str(value).strip().lower()
        for fam, name in _SHORT_NAMES.items():
            if key in (name, fam.name.lower()):
                return fam
        raise ValueError(f"unknown point-set family {value!r}")


_SHORT_NAMES = {
    Family.CROSS_POLYTOPE: "cp",
    Family.SCALED_CROSS_POLYTOPE: "scp",
    Family.SIMPLEX: "simplex",
    Family.HADAMARD: "hadamard",
    Family.REED_MULLER: "rm",
    Family.GAUSSIAN: "gauss",
    Family.EPS_NET: "epsnet",
}

EXPLICIT_FAMILIES = frozenset({Family.GAUSSIAN, Family.EPS_NET})


@dataclass(frozen=True, eq=False)
class PointSet:
    """An immutable point set C ⊂ R^pad_d.

    ``d`` is the caller's vector dimension and ``pad_d`` the dimension the
    points live in; they differ only when a Hadamard or Reed-Muller set was
    built for a zero-padded input (see :func:`make_pointset`).
    """

    family: Family
    d: int
    m: int
    R: float
    pad_d: int
    explicit_points: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.explicit_points is not None:
            self.explicit_points.setflags(write=False)

    @property
    def family_id(self):
        return int(self.family)

    def decode(self, index):
        """Return point ``index`` as a fresh length-``pad_d`` array."""
        return decode(self, index)

    @cached_property
    def points(self):
        """All m points as a read-only (m, pad_d) array."""
        if self.explicit_points is not None:
            return self.explicit_points
        P = _structured_points(self)
        P.setflags(write=False)
        return P

    @cached_property
    def sq_norms(self):
        """Squared Euclidean norm of every point, from closed forms where known."""
        n = self.pad_d
        fam = self.family
        if fam in (Family.CROSS_POLYTOPE, Family.REED_MULLER):
            out = np.full(self.m, float(n))
        elif fam is Family.SCALED_CROSS_POLYTOPE:
            out = np.full(self.m, 4.0 * n)
        elif fam is Family.HADAMARD:
            out = np.full(self.m, 4.0 * n * n)
        elif fam is Family.SIMPLEX:
            out = np.full(self.m, 4.0 * n * n)
            out[0] = 16.0 * n
        else:
            out = np.einsum("ij,ij->i", self.points, self.points)
        out.setflags(write=False)
        return out

    @cached_property
    def point_sum(self):
        """Sum of all points; zero for the centrally symmetric families."""
        if self.family is Family.SIMPLEX:
            out = np.full(self.pad_d, 2.0 * self.pad_d - 4.0)
        elif self.family in EXPLICIT_FAMILIES:
            out = self.points.sum(axis=0)
        else:
            out = np.zeros(self.pad_d)
        out.setflags(write=False)
        return out

    def __repr__(self):
        return (
            f"PointSet(family={self.family.name}, d={self.d}, pad_d={self.pad_d}, "
            f"m={self.m}, R={self.R:.6g})"
        )


def _sylvester_entries(rows, cols):
    # H[r, c] = (-1)^popcount(r & c) for the Sylvester construction
    bits = np.bitwise_and(np.asarray(rows)[:, None], np.asarray(cols)[None, :])
    parity = np.zeros(bits.shape, dtype=np.int64)
    while np.any(bits):
        parity ^= bits & 1
        bits = bits >> 1
    return 1.0 - 2.0 * parity


def decode(ps, index):
    index = int(index)
    if not 0 <= index < ps.m:
        raise IndexError(f"index {index} out of range for m={ps.m}")
    n = ps.pad_d
    fam = ps.family
    if ps.explicit_points is not None:
        return np.array(ps.explicit_points[index], dtype=float)
    out = np.zeros(n)
    if fam in (Family.CROSS_POLYTOPE, Family.SCALED_CROSS_POLYTOPE):
        scale = math.sqrt(n) * (2.0 if fam is Family.SCALED_CROSS_POLYTOPE else 1.0)
        if index < n:
            out[index] = scale
        else:
            out[index - n] = -scale
    elif fam is Family.SIMPLEX:
        if index == 0:
            out[:] = -4.0
        else:
            out[index - 1] = 2.0 * n
    elif fam is Family.HADAMARD:
        col = _sylvester_entries(np.arange(1, n + 1), [index])[:, 0]
        out = 2.0 * math.sqrt(n) * col
    elif fam is Family.REED_MULLER:
        sign = 1.0 if index < n else -1.0
        out = sign * _sylvester_entries([index % n], np.arange(n))[0]
    else:  # pragma: no cover - explicit families handled above
        raise ValueError(f"family {fam!r} has no closed-form decoder")
    return out


def _structured_points(ps):
    n = ps.pad_d
    fam = ps.family
    if fam in (Family.CROSS_POLYTOPE, Family.SCALED_CROSS_POLYTOPE):
        scale = math.sqrt(n) * (2.0 if fam is Family.SCALED_CROSS_POLYTOPE else 1.0)
        eye = scale * np.eye(n)
        return np.vstack((eye, -eye))
    if fam is Family.SIMPLEX:
        return np.vstack((np.full((1, n), -4.0), 2.0 * n * np.eye(n)))
    if fam is Family.HADAMARD:
        H = _sylvester_entries(np.arange(n + 1), np.arange(n + 1))
        return 2.0 * math.sqrt(n) * H[1:, :].T
    if fam is Family.REED_MULLER:
        H = _sylvester_entries(np.arange(n), np.arange(n))
        return np.vstack((H, -H))
    raise ValueError(f"family {fam!r} has no closed-form point list")


def _check_dim(d, minimum=1):
    if int(d) != d or d < minimum:
        raise InvalidDimension(f"dimension must be an integer >= {minimum}, got {d}")
    return int(d)


def build_cross_polytope(d):
    d = _check_dim(d)
    return PointSet(Family.CROSS_POLYTOPE, d, 2 * d, math.sqrt(d), d)


def build_scaled_cross_polytope(d):
    d = _check_dim(d)
    return PointSet(Family.SCALED_CROSS_POLYTOPE, d, 2 * d, 2.0 * math.sqrt(d), d)


def build_simplex(d):
    d = _check_dim(d, minimum=2)
    return PointSet(Family.SIMPLEX, d, d + 1, 2.0 * d, d)


def build_hadamard(d):
    d = _check_dim(d, minimum=3)
    if not is_power_of_two(d + 1):
        raise DimensionConstraint(f"Hadamard point set needs d+1 a power of two, got d={d}")
    return PointSet(Family.HADAMARD, d, d + 1, 2.0 * d, d)


def build_reed_muller(d):
    d = _check_dim(d)
    if not is_power_of_two(d):
        raise DimensionConstraint(f"Reed-Muller point set needs d a power of two, got d={d}")
    return PointSet(Family.REED_MULLER, d, 2 * d, math.sqrt(d), d)


def gaussian_cardinality(d, R, exponent_const=20.0):
    """Number of points ``ceil(d^2 * exp(c*d/R^2))`` used by the random construction."""
    return math.ceil(math.exp(exponent_const * d / R**2 + 2.0 * math.log(d)))


def build_gaussian(
    d,
    R,
    seed,
    cardinality_override=None,
    *,
    exponent_const=20.0,
    max_points=DEFAULT_MAX_POINTS,
):
    """Random point set of i.i.d. N(0, R^2/(9d)) vectors.

    The default size follows the high-probability covering argument and is
    huge for small R; ``cardinality_override`` fixes the size directly and
    relaxes the R range check to a warning.
    """
    d = _check_dim(d)
    R = float(R)
    in_range = 5.0 <= R <= 6.0 * math.sqrt(d)
    if cardinality_override is None:
        if not in_range:
            raise ParameterRange(f"R={R} outside [5, 6*sqrt(d)] = [5, {6 * math.sqrt(d):.4g}]")
        t = gaussian_cardinality(d, R, exponent_const)
    else:
        if not in_range:
            warnings.warn(
                f"R={R} outside [5, 6*sqrt(d)]; covering is not guaranteed", stacklevel=2
            )
        t = int(cardinality_override)
        if t < 1:
            raise ParameterRange(f"cardinality_override must be positive, got {t}")
    if t > max_points:
        raise CardinalityOverflow(f"{t} points exceeds the cap of {max_points}")
    rng = np.random.default_rng(seed)
    pts = rng.normal(0.0, R / (3.0 * math.sqrt(d)), size=(t, d))
    return PointSet(
        Family.GAUSSIAN, d, t, R, d, explicit_points=pts,
        params={"seed": seed, "exponent_const": exponent_const},
    )


def build_eps_net(d, eps):
    """Unit-sphere grid with covering radius eps, scaled by 1/(1-eps)."""
    d = _check_dim(d, minimum=2)
    if d > 3:
        raise UnsupportedDimension(f"eps-net point sets are limited to d <= 3, got {d}")
    if not 0.0 < eps < 1.0:
        raise ParameterRange(f"eps must lie in (0, 1), got {eps}")
    scale = 1.0 / (1.0 - eps)
    pts = unit_grid(d, eps) * scale
    return PointSet(
        Family.EPS_NET, d, len(pts), scale * (1.0 + 1e-12), d,
        explicit_points=pts, params={"eps": eps},
    )


def padded_dimension(family, d):
    """Smallest valid internal dimension >= d for the family."""
    family = Family.parse(family)
    if family is Family.HADAMARD:
        return max(4, next_power_of_two(d + 1)) - 1
    if family is Family.REED_MULLER:
        return next_power_of_two(d)
    return d


def make_pointset(family, d, **kwargs):
    """Build a point set for ``d``-dimensional inputs, padding where required.

    Keyword arguments are forwarded to the Gaussian (``R``, ``seed``,
    ``cardinality_override``, ...) and eps-net (``eps``) builders.
    """
    family = Family.parse(family)
    d = _check_dim(d)
    if family is Family.CROSS_POLYTOPE:
        return build_cross_polytope(d)
    if family is Family.SCALED_CROSS_POLYTOPE:
        return build_scaled_cross_polytope(d)
    if family is Family.SIMPLEX:
        return build_simplex(d)
    if family in (Family.HADAMARD, Family.REED_MULLER):
        n = padded_dimension(family, d)
        base = build_hadamard(n) if family is Family.HADAMARD else build_reed_muller(n)
        return PointSet(base.family, d, base.m, base.R, n)
    if family is Family.GAUSSIAN:
        return build_gaussian(d, kwargs.pop("R"), kwargs.pop("seed", 0), **kwargs)
    return build_eps_net(d, kwargs["eps"])
