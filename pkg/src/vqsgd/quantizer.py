"""Index quantization of gradients and the VQSG wire format.

A gradient g is sent as its norm (f32) plus ``s`` independent point indices
drawn from the convex decomposition of ``g / ||g||``. The receiver averages
the decoded points and rescales by the norm.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .encoder import CoeffVector, encode, pad_to_valid
from .errors import InvalidGradient, MismatchError, ParseError
from .pointset import Family

MAGIC = b"VQSG"
VERSION = 1
_HEADER = struct.Struct("<4sBBIHf")
NORM_BITS = 32


class RngState:
    """Seeded, stream-separated random source.

    Identical ``(seed, stream)`` pairs yield identical sample sequences, so
    every simulated worker can own one and results do not depend on
    execution order.
    """

    def __init__(self, seed=0, stream=0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def spawn(self, stream):
        return RngState(self.seed, stream)

    def __repr__(self):
        return f"RngState(seed={self.seed}, stream={self.stream})"


def _generator(rng):
    if isinstance(rng, RngState):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RngState(0 if rng is None else rng).generator


@dataclass(frozen=True, eq=False)
class QuantizedGradient:
    family_id: int
    d: int
    s: int
    norm: float
    indices: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, QuantizedGradient):
            return NotImplemented
        return (
            self.family_id == other.family_id
            and self.d == other.d
            and self.s == other.s
            and np.float32(self.norm) == np.float32(other.norm)
            and np.array_equal(self.indices, other.indices)
        )


def sample(a, rng, size=None):
    """Draw index i with probability a_i by inverse CDF.

    Index i owns the half-open interval [cdf_{i-1}, cdf_i), so points with
    zero mass are never returned.
    """
    coeffs = a.a if isinstance(a, CoeffVector) else np.asarray(a, dtype=float)
    cdf = np.cumsum(coeffs)
    u = _generator(rng).random(size) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


def quantize(ps, g, s=1, rng=None):
    g = np.asarray(g, dtype=float)
    if g.ndim != 1:
        raise InvalidGradient(f"gradient must be 1-d, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidGradient("gradient contains non-finite entries")
    if s < 1:
        raise ValueError(f"repetition count must be >= 1, got {s}")
    d = len(g)
    if d != ps.d and d != ps.pad_d:
        raise MismatchError(f"gradient dimension {d} does not match point set d={ps.d}")
    norm = float(np.float32(np.linalg.norm(g)))
    if norm == 0.0:
        return QuantizedGradient(ps.family_id, d, s, 0.0, np.zeros(s, dtype=np.int64))
    v, _ = pad_to_valid(g / np.linalg.norm(g), ps.family)
    if len(v) < ps.pad_d:
        v = np.concatenate((v, np.zeros(ps.pad_d - len(v))))
    v = v / max(1.0, np.linalg.norm(v))
    a = encode(ps, v)
    indices = sample(a, rng, size=s).astype(np.int64)
    return QuantizedGradient(ps.family_id, d, s, norm, indices)


def _check_message(ps, qg):
    if qg.family_id != ps.family_id:
        raise MismatchError(f"message family {qg.family_id} != point set family {ps.family_id}")
    if qg.d > ps.pad_d:
        raise MismatchError(f"message dimension {qg.d} exceeds point set dimension {ps.pad_d}")
    idx = np.asarray(qg.indices)
    if len(idx) != qg.s:
        raise MismatchError(f"{len(idx)} indices for s={qg.s}")
    if idx.size and (idx.min() < 0 or idx.max() >= ps.m):
        raise IndexError(f"index out of range for m={ps.m}")


def dequantize(ps, qg):
    _check_message(ps, qg)
    if qg.norm == 0.0:
        return np.zeros(qg.d)
    idx = np.asarray(qg.indices)
    mean_point = ps.points[idx].sum(axis=0) / qg.s
    return qg.norm * mean_point[: qg.d]


def aggregate(ps, messages):
    """Mean of the dequantized messages, summed in the given order."""
    if not messages:
        raise ValueError("cannot aggregate an empty message list")
    first = messages[0]
    for qg in messages[1:]:
        if (qg.family_id, qg.d) != (first.family_id, first.d):
            raise MismatchError("messages differ in family or dimension")
    total = np.zeros(first.d)
    for qg in messages:
        total += dequantize(ps, qg)
    return total / len(messages)


def exact_second_moment(ps, a):
    """E||Q(v)||^2 = sum_i a_i ||c_i||^2 for the decomposition a of v."""
    coeffs = a.a if isinstance(a, CoeffVector) else np.asarray(a, dtype=float)
    if len(coeffs) != ps.m:
        raise MismatchError(f"{len(coeffs)} coefficients for a point set of size {ps.m}")
    return float(coeffs @ ps.sq_norms)


def index_bits(m, s=1, exact_log=False):
    """Information-theoretic cost of s indices into a set of size m."""
    if exact_log:
        return s * math.log2(m)
    return s * max(1, math.ceil(math.log2(m))) if m > 1 else 0


def serialize(qg):
    if not 1 <= qg.s <= 0xFFFF:
        raise ValueError(f"s={qg.s} does not fit in u16")
    head = _HEADER.pack(MAGIC, VERSION, qg.family_id, qg.d, qg.s, qg.norm)
    return head + np.asarray(qg.indices, dtype="<u4").tobytes()


def deserialize(data):
    """Parse exactly one VQSG record; trailing bytes are an error."""
    qg, used = _deserialize_one(data, 0)
    if used != len(data):
        raise ParseError(f"{len(data) - used} trailing bytes after record")
    return qg


def iter_records(data):
    """Yield every VQSG record in a concatenated byte stream."""
    offset = 0
    while offset < len(data):
        qg, offset = _deserialize_one(data, offset)
        yield qg


def _deserialize_one(data, offset):
    if len(data) - offset < _HEADER.size:
        raise ParseError("truncated header")
    magic, version, fam, d, s, norm = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"unsupported version {version}")
    try:
        Family(fam)
    except ValueError:
        raise ParseError(f"unknown family id {fam}") from None
    start = offset + _HEADER.size
    end = start + 4 * s
    if len(data) < end:
        raise ParseError("truncated index payload")
    indices = np.frombuffer(data[start:end], dtype="<u4").astype(np.int64)
    return QuantizedGradient(fam, d, s, float(norm), indices), end
