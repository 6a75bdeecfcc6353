"""Locally private index quantization.

Two mechanisms randomize the sampled index before it leaves the worker:
randomized response over the m indices, and RAPPOR bit flips over the 1-hot
encoding. Both have unbiased dequantizers. :func:`audit_dp_ratio` searches
for the worst coefficient ratio of the plain quantizer, which bounds its
intrinsic privacy when every point carries positive mass.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

from .encoder import encode, pad_to_valid
from .errors import CardinalityOverflow, InvalidGradient, MismatchError, ParameterRange, ParseError
from .pointset import Family, padded_dimension
from .quantizer import _generator, sample

MAGIC = b"VQPM"
VERSION = 1
_HEADER = struct.Struct("<4sBBBIff")
DEFAULT_RAPPOR_CAP = 1 << 16


class Mechanism(enum.IntEnum):
    RR = 0
    RAPPOR = 1


@dataclass(frozen=True)
class RrParams:
    epsilon: float
    m: int
    p: float
    q: float

    @classmethod
    def from_epsilon(cls, epsilon, m):
        if not epsilon > 0:
            raise ParameterRange(f"epsilon must be positive, got {epsilon}")
        if m < 2:
            raise ParameterRange(f"randomized response needs m >= 2, got {m}")
        e = math.exp(epsilon)
        return cls(epsilon, m, e / (e + m - 1), 1.0 / (e + m - 1))

    def worst_case_ratio(self):
        """max over outputs y and inputs i, j of P(y | i) / P(y | j)."""
        return self.p / self.q


@dataclass(frozen=True)
class RapporParams:
    epsilon: float
    p: float

    @classmethod
    def from_epsilon(cls, epsilon):
        if not epsilon > 0:
            raise ParameterRange(f"epsilon must be positive, got {epsilon}")
        return cls(epsilon, 1.0 / (math.exp(epsilon / 2.0) + 1.0))

    def worst_case_ratio(self):
        # two 1-hot inputs differ in exactly two bits, each contributing (1-p)/p
        return ((1.0 - self.p) / self.p) ** 2


@dataclass(frozen=True, eq=False)
class PrivateMessage:
    mechanism: Mechanism
    epsilon: float
    payload: object
    norm: float
    d: int
    family_id: int

    def __eq__(self, other):
        if not isinstance(other, PrivateMessage):
            return NotImplemented
        same_payload = (
            self.payload == other.payload
            if self.mechanism is Mechanism.RR
            else np.array_equal(self.payload, other.payload)
        )
        return (
            (self.mechanism, self.d, self.family_id) == (other.mechanism, other.d, other.family_id)
            and np.float32(self.epsilon) == np.float32(other.epsilon)
            and np.float32(self.norm) == np.float32(other.norm)
            and same_payload
        )


def _f32(x):
    return float(np.float32(x))


def _sample_index(ps, g, rng):
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise InvalidGradient("gradient contains non-finite entries")
    norm = np.linalg.norm(g)
    v = g / norm if norm > 0 else np.zeros_like(g)
    v, _ = pad_to_valid(v, ps.family)
    if len(v) < ps.pad_d:
        v = np.concatenate((v, np.zeros(ps.pad_d - len(v))))
    v = v / max(1.0, np.linalg.norm(v))
    return int(sample(encode(ps, v), rng)), _f32(norm)


def rr_privatize(ps, g, epsilon, rng=None):
    epsilon = _f32(epsilon)
    params = RrParams.from_epsilon(epsilon, ps.m)
    gen = _generator(rng)
    idx, norm = _sample_index(ps, g, gen)
    if gen.random() >= params.p:
        idx = (idx + int(gen.integers(1, ps.m))) % ps.m
    return PrivateMessage(Mechanism.RR, epsilon, idx, norm, len(g), ps.family_id)


def rr_dequantize(ps, msg):
    _check(ps, msg, Mechanism.RR)
    if msg.norm == 0.0:
        return np.zeros(msg.d)
    params = RrParams.from_epsilon(msg.epsilon, ps.m)
    est = (ps.points[msg.payload] - params.q * ps.point_sum) / (params.p - params.q)
    return msg.norm * est[: msg.d]


def rappor_privatize(ps, g, epsilon, rng=None, cap=DEFAULT_RAPPOR_CAP):
    if ps.m > cap:
        raise CardinalityOverflow(f"RAPPOR payload of {ps.m} bits exceeds cap {cap}")
    epsilon = _f32(epsilon)
    params = RapporParams.from_epsilon(epsilon)
    gen = _generator(rng)
    idx, norm = _sample_index(ps, g, gen)
    bits = (gen.random(ps.m) < params.p).astype(np.uint8)
    bits[idx] ^= 1
    return PrivateMessage(Mechanism.RAPPOR, epsilon, bits, norm, len(g), ps.family_id)


def rappor_dequantize(ps, msg):
    _check(ps, msg, Mechanism.RAPPOR)
    if msg.norm == 0.0:
        return np.zeros(msg.d)
    params = RapporParams.from_epsilon(msg.epsilon)
    y = np.asarray(msg.payload, dtype=float)
    if len(y) != ps.m:
        raise MismatchError(f"payload has {len(y)} bits, point set has {ps.m} points")
    est = ps.points.T @ (y - params.p) / (1.0 - 2.0 * params.p)
    return msg.norm * est[: msg.d]


def dequantize_private(ps, msg):
    if msg.mechanism is Mechanism.RR:
        return rr_dequantize(ps, msg)
    return rappor_dequantize(ps, msg)


def _check(ps, msg, mechanism):
    if msg.mechanism is not mechanism:
        raise MismatchError(f"expected a {mechanism.name} message, got {msg.mechanism.name}")
    if msg.family_id != ps.family_id:
        raise MismatchError(f"message family {msg.family_id} != point set family {ps.family_id}")


# -- wire format -------------------------------------------------------------


def serialize_private(msg):
    head = _HEADER.pack(
        MAGIC, VERSION, int(msg.mechanism), msg.family_id, msg.d, msg.epsilon, msg.norm
    )
    if msg.mechanism is Mechanism.RR:
        return head + struct.pack("<I", msg.payload)
    bits = np.asarray(msg.payload, dtype=np.uint8)
    return head + np.packbits(bits, bitorder="little").tobytes()


def deserialize_private(data, m=None):
    """Parse a VQPM record. RAPPOR records need ``m`` for explicit families."""
    if len(data) < _HEADER.size:
        raise ParseError("truncated header")
    magic, version, mech, fam, d, eps, norm = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"unsupported version {version}")
    try:
        mech = Mechanism(mech)
        family = Family(fam)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    body = data[_HEADER.size:]
    if mech is Mechanism.RR:
        if len(body) != 4:
            raise ParseError(f"RR payload must be 4 bytes, got {len(body)}")
        payload = struct.unpack("<I", body)[0]
    else:
        if m is None:
            m = structured_cardinality(family, d)
        if len(body) != (m + 7) // 8:
            raise ParseError(f"RAPPOR payload of {len(body)} bytes does not match m={m}")
        payload = np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=m, bitorder="little")
    return PrivateMessage(mech, float(eps), payload, float(norm), d, fam)


def structured_cardinality(family, d):
    family = Family(family)
    n = padded_dimension(family, d)
    if family in (Family.CROSS_POLYTOPE, Family.SCALED_CROSS_POLYTOPE, Family.REED_MULLER):
        return 2 * n
    if family in (Family.SIMPLEX, Family.HADAMARD):
        return n + 1
    raise ParseError(f"cardinality of family {family.name} is not implied by d; pass m")


# -- privacy auditing --------------------------------------------------------

# closed-form families; cp and rm give some points zero mass, so they audit to inf
AUDITABLE_FAMILIES = frozenset(
    {
        Family.SIMPLEX,
        Family.HADAMARD,
        Family.SCALED_CROSS_POLYTOPE,
        Family.CROSS_POLYTOPE,
        Family.REED_MULLER,
    }
)


@dataclass(frozen=True, eq=False)
class AuditResult:
    max_ratio: float
    x: np.ndarray
    y: np.ndarray
    point_index: int
    n_candidates: int


def _random_ball(gen, k, n):
    z = gen.standard_normal((k, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * gen.random((k, 1)) ** (1.0 / n)


def extremal_candidates(ps):
    """Deterministic inputs where the worst-case ratios are attained.

    Includes ±e_i, ±c/||c|| for every point, ±1/√d with a few sign patterns,
    and the two unit vectors that maximize and minimize each coefficient
    when the decomposition is affine in v.
    """
    n = ps.pad_d
    eye = np.eye(n)
    P = np.asarray(ps.points, dtype=float)
    dirs = P / np.linalg.norm(P, axis=1, keepdims=True)
    signs = [np.ones(n), np.where(np.arange(n) % 2 == 0, 1.0, -1.0)]
    signs += [np.where(np.arange(n) == i, -1.0, 1.0) for i in range(min(n, 4))]
    flat = np.array(signs) / math.sqrt(n)
    A0 = encode(ps, np.zeros(n)).a
    J = np.array([encode(ps, e).a for e in eye]) - A0  # rows: d a / d v_j
    grads = J.T
    norms = np.linalg.norm(grads, axis=1, keepdims=True)
    grads = grads[norms[:, 0] > 0] / norms[norms[:, 0] > 0]
    cands = np.vstack((eye, -eye, dirs, -dirs, flat, -flat, grads, -grads))
    return cands


def audit_dp_ratio(ps, n_pairs, rng=None):
    """Largest a_c(x) / a_c(y) over sampled and extremal unit-ball inputs.

    Every candidate is compared with every other, so ``n_pairs`` random pairs
    contribute ``2 * n_pairs`` points to an all-pairs search. Returns
    ``inf`` with a witnessing pair when some candidate gives a point zero
    mass while another does not.
    """
    if ps.family not in AUDITABLE_FAMILIES:
        raise MismatchError(f"family {ps.family.name} has no closed-form decomposition to audit")
    gen = _generator(rng)
    n = ps.pad_d
    X = np.vstack((_random_ball(gen, 2 * int(n_pairs), n), extremal_candidates(ps)))
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
    A = np.array([encode(ps, x).a for x in X])
    hi = A.argmax(axis=0)
    lo = A.argmin(axis=0)
    amax = A[hi, np.arange(ps.m)]
    amin = A[lo, np.arange(ps.m)]
    with np.errstate(divide="ignore"):
        ratios = np.where(amin > 0, amax / np.where(amin > 0, amin, 1.0), np.inf)
    c = int(np.argmax(ratios))
    return AuditResult(float(ratios[c]), X[hi[c]], X[lo[c]], c, len(X))


def published_ratio_bound(family, d):
    """Published worst-case coefficient ratio for the private families."""
    family = Family.parse(family)
    if family is Family.SIMPLEX:
        return 7.0
    if family is Family.HADAMARD:
        return 1.0 + math.sqrt(2.0)
    if family is Family.SCALED_CROSS_POLYTOPE:
        return 2.0 * math.sqrt(d) + 3.0
    return math.inf
