"""Deterministic covering grids on the unit circle and the unit 2-sphere.

Both grids have chordal covering radius at most ``eps``: every unit vector
lies within Euclidean distance ``eps`` of some grid point.
"""

import math

import numpy as np


def circle_size(eps):
    """Number of equally spaced points needed on S^1 for covering radius eps."""
    return math.ceil(2.0 * math.pi / (2.0 * math.asin(min(eps, 2.0) / 2.0)))


def circle_grid(eps):
    n = circle_size(eps)
    theta = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack((np.cos(theta), np.sin(theta)))


def sphere_grid(eps):
    """Latitude-band grid on S^2.

    Bands have polar half-width ``eps/2``; within a band the azimuthal spacing
    is chosen so that moving along the latitude circle costs at most another
    ``eps/2`` of arc. Arc length bounds chord length, so the covering radius
    is at most ``eps``.
    """
    half = eps / 2.0
    n_bands = math.ceil(math.pi / (2.0 * half))
    width = math.pi / n_bands
    pts = []
    for k in range(n_bands):
        lo, hi = k * width, (k + 1) * width
        centre = (lo + hi) / 2.0
        sin_max = 1.0 if lo <= math.pi / 2 <= hi else max(math.sin(lo), math.sin(hi))
        n_az = max(1, math.ceil(sin_max * math.pi / half))
        phi = 2.0 * math.pi * np.arange(n_az) / n_az
        st, ct = math.sin(centre), math.cos(centre)
        pts.append(np.column_stack((st * np.cos(phi), st * np.sin(phi), np.full(n_az, ct))))
    return np.vstack(pts)


def unit_grid(d, eps):
    """Covering grid of S^{d-1} for d in {2, 3}."""
    if d == 2:
        return circle_grid(eps)
    if d == 3:
        return sphere_grid(eps)
    raise ValueError(f"deterministic grids exist only for d in (2, 3), got {d}")
