"""Sylvester Hadamard matrices and the fast Walsh-Hadamard transform."""

import numpy as np


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n):
    if n <= 1:
        return 1
    return 1 << (int(n) - 1).bit_length()


def sylvester(n):
    """Return the n x n Sylvester Hadamard matrix (n a power of two).

    Built by the recursion H_{2k} = [[H_k, H_k], [H_k, -H_k]] from H_1 = [1].
    The result is symmetric, so row i and column i coincide.
    """
    if not is_power_of_two(n):
        raise ValueError(f"Hadamard order must be a power of two, got {n}")
    H = np.ones((1, 1))
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H


def fwht(x):
    """Unnormalized fast Walsh-Hadamard transform along the last axis.

    Equals ``x @ sylvester(n)`` (and ``sylvester(n) @ x`` for vectors) in
    O(n log n). The input is not modified.
    """
    a = np.array(x, dtype=float, copy=True)
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"transform length must be a power of two, got {n}")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        a = a.reshape(*lead, n // (2 * h), 2, h)
        top = a[..., 0, :] + a[..., 1, :]
        bot = a[..., 0, :] - a[..., 1, :]
        a = np.stack((top, bot), axis=-2)
        h *= 2
    return a.reshape(*lead, n)
