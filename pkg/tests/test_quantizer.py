import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqsgd.encoder import encode, encode_cross_polytope, encode_simplex
from vqsgd.errors import InvalidGradient, MismatchError, ParseError
from vqsgd.pointset import (
    Family,
    build_cross_polytope,
    build_hadamard,
    build_reed_muller,
    build_simplex,
    make_pointset,
)
from vqsgd.quantizer import (
    QuantizedGradient,
    RngState,
    aggregate,
    dequantize,
    deserialize,
    exact_second_moment,
    index_bits,
    iter_records,
    quantize,
    sample,
    serialize,
)


def unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def draws(ps, v, n, s=1, seed=0):
    """n dequantized estimates of v, vectorized over the sampler."""
    a = encode(ps, v)
    idx = sample(a, RngState(seed), size=(n, s))
    return ps.points[idx].mean(axis=1)


class TestRngState:
    def test_reproducible(self):
        a = RngState(7, 3).generator.random(5)
        b = RngState(7, 3).generator.random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RngState(7, 0).generator.random(5)
        b = RngState(7).spawn(1).generator.random(5)
        assert not np.array_equal(a, b)


class TestSample:
    def test_point_mass(self):
        a = np.zeros(8)
        a[0] = 1
        assert np.all(sample(a, RngState(0), size=1000) == 0)

    def test_zero_mass_never_drawn(self):
        a = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
        assert set(np.unique(sample(a, RngState(1), size=10000))) == {1, 3}

    def test_uniform_frequencies(self):
        counts = np.bincount(sample(np.full(8, 1 / 8), RngState(2), size=100_000), minlength=8)
        np.testing.assert_allclose(counts / 1e5, 0.125, atol=0.004)

    def test_reproducible(self):
        a = np.full(5, 0.2)
        np.testing.assert_array_equal(sample(a, RngState(3), 50), sample(a, RngState(3), 50))


class TestQuantize:
    def test_zero_gradient(self):
        ps = build_cross_polytope(4)
        qg = quantize(ps, np.zeros(4), 3, RngState(0))
        assert qg.norm == 0 and qg.s == 3
        np.testing.assert_array_equal(qg.indices, 0)
        np.testing.assert_array_equal(dequantize(ps, qg), np.zeros(4))

    def test_index_distribution(self):
        ps = build_cross_polytope(4)
        rng = RngState(0)
        idx = np.array([quantize(ps, np.array([2.0, 0, 0, 0]), 1, rng).indices[0] for _ in range(20000)])
        assert quantize(ps, np.array([2.0, 0, 0, 0]), 1, rng).norm == 2.0
        p = 0.5625
        assert abs((idx == 0).mean() - p) < 4 * math.sqrt(p * (1 - p) / 20000)

    def test_single_sample(self):
        ps = build_simplex(4)
        qg = quantize(ps, np.array([0.0, 3.0, 0, 0]), 1, RngState(5))
        np.testing.assert_allclose(dequantize(ps, qg), 3.0 * ps.points[qg.indices[0]])

    def test_non_finite(self):
        with pytest.raises(InvalidGradient):
            quantize(build_cross_polytope(3), np.array([1.0, np.nan, 0]), 1, RngState(0))

    def test_padded_family_truncates(self):
        ps = make_pointset("hadamard", 5)
        qg = quantize(ps, np.ones(5), 2, RngState(0))
        assert qg.d == 5 and dequantize(ps, qg).shape == (5,)

    @pytest.mark.parametrize("ps", [build_cross_polytope(8), build_simplex(8), build_hadamard(7)],
                             ids=lambda p: p.family.name)
    def test_almost_sure_norm_bound(self, ps):
        rng = RngState(4)
        g = 5.0 * unit(np.random.default_rng(0), ps.d)
        for _ in range(200):
            assert np.linalg.norm(dequantize(ps, quantize(ps, g, 1, rng))) <= 5.0 * ps.R + 1e-9


class TestMoments:
    @pytest.mark.parametrize(
        "ps", [build_cross_polytope(16), build_simplex(16), build_hadamard(15), build_reed_muller(16)],
        ids=lambda p: p.family.name,
    )
    def test_unbiased_and_variance(self, ps):
        rng = np.random.default_rng(ps.m)
        v = unit(rng, ps.d)
        n = 100_000
        est = draws(ps, v, n, seed=ps.m)
        a = encode(ps, v)
        second = exact_second_moment(ps, a)
        # coordinate variance is at most the full second moment
        band = 3 * np.sqrt(second / n)
        assert np.all(np.abs(est.mean(axis=0) - v) <= band)
        err = np.sum((est - v) ** 2, axis=1)
        assert abs(err.mean() - (second - 1.0)) <= 3 * err.std(ddof=1) / math.sqrt(n)

    def test_repetition_scaling(self):
        ps = build_cross_polytope(16)
        v = unit(np.random.default_rng(1), 16)
        base = None
        for s in (1, 5, 10, 20):
            est = draws(ps, v, 20_000, s=s, seed=s)
            scaled = np.sum((est - v) ** 2, axis=1).mean() * s
            base = base or scaled
            assert abs(scaled / base - 1) < 0.15

    def test_aggregate_variance_bound(self):
        ps = build_cross_polytope(8)
        rng = np.random.default_rng(2)
        g = np.array([unit(rng, 8) for _ in range(10)])
        n = 5000
        ests = np.mean([draws(ps, gi, n, seed=k) for k, gi in enumerate(g)], axis=0)
        err = np.sum((ests - g.mean(axis=0)) ** 2, axis=1)
        bound = ps.R**2 / 10
        assert err.mean() <= bound * (1 + 3 / math.sqrt(n))


class TestExactSecondMoment:
    def test_cross_polytope_constant(self):
        ps = build_cross_polytope(4)
        for v in (np.zeros(4), np.array([0.3, -0.1, 0.2, 0.5])):
            assert exact_second_moment(ps, encode_cross_polytope(v)) == pytest.approx(4.0, abs=1e-12)

    def test_reed_muller_constant(self):
        ps = build_reed_muller(4)
        v = np.array([0.1, -0.7, 0.2, 0.4])
        assert exact_second_moment(ps, encode(ps, v)) == pytest.approx(4.0, abs=1e-12)

    def test_simplex_zero(self):
        a = encode_simplex(np.zeros(4))
        assert exact_second_moment(build_simplex(4), a) == pytest.approx(64.0, abs=1e-12)


class TestAggregate:
    def test_identical(self):
        ps = build_cross_polytope(4)
        qg = quantize(ps, np.array([0.2, 0.1, 0, 0]), 2, RngState(0))
        np.testing.assert_allclose(aggregate(ps, [qg] * 5), dequantize(ps, qg))

    def test_cancellation(self):
        ps = build_cross_polytope(4)
        a = QuantizedGradient(int(Family.CROSS_POLYTOPE), 4, 1, 1.0, np.array([1]))
        b = QuantizedGradient(int(Family.CROSS_POLYTOPE), 4, 1, 1.0, np.array([5]))
        np.testing.assert_array_equal(aggregate(ps, [a, b]), np.zeros(4))

    def test_heterogeneous(self):
        ps = build_cross_polytope(4)
        a = QuantizedGradient(0, 4, 1, 1.0, np.array([1]))
        b = QuantizedGradient(0, 3, 1, 1.0, np.array([1]))
        with pytest.raises(MismatchError):
            aggregate(ps, [a, b])

    def test_family_mismatch(self):
        qg = QuantizedGradient(int(Family.SIMPLEX), 4, 1, 1.0, np.array([0]))
        with pytest.raises(MismatchError):
            dequantize(build_cross_polytope(4), qg)


class TestIndexBits:
    def test_examples(self):
        assert index_bits(200, 5) + 32 == 72
        assert index_bits(2 * 795010, 100) == 2100
        assert abs(index_bits(2 * 795010, 100, exact_log=True) - 2060) <= 1


class TestWireFormat:
    def test_size(self):
        qg = quantize(build_cross_polytope(100), np.ones(100), 5, RngState(0))
        assert len(serialize(qg)) == 36

    def test_round_trip(self):
        qg = quantize(build_simplex(10), np.arange(10.0), 4, RngState(1))
        assert deserialize(serialize(qg)) == qg

    def test_layout(self):
        qg = QuantizedGradient(2, 3, 1, 1.5, np.array([258]))
        assert serialize(qg) == b"VQSG\x01\x02\x03\x00\x00\x00\x01\x00\x00\x00\xc0?\x02\x01\x00\x00"

    def test_concatenated(self):
        ps = build_cross_polytope(3)
        msgs = [quantize(ps, np.array([1.0, k, 0]), k + 1, RngState(k)) for k in range(3)]
        assert list(iter_records(b"".join(serialize(q) for q in msgs))) == msgs

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda b: b"XXXX" + b[4:],
            lambda b: b[:4] + b"\x02" + b[5:],
            lambda b: b[:5] + b"\x09" + b[6:],
            lambda b: b[:-1],
            lambda b: b[:10],
            lambda b: b + b"\x00",
        ],
        ids=["magic", "version", "family", "payload", "header", "trailing"],
    )
    def test_corruption(self, mutate):
        data = serialize(QuantizedGradient(0, 4, 2, 1.0, np.array([1, 2])))
        with pytest.raises(ParseError):
            deserialize(mutate(data))

    @settings(max_examples=200, deadline=None)
    @given(
        fam=st.integers(0, 6),
        d=st.integers(1, 2**32 - 1),
        idx=st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=40),
        norm=st.floats(0, 2.0**100, allow_nan=False, width=32),
    )
    def test_fuzz_round_trip(self, fam, d, idx, norm):
        qg = QuantizedGradient(fam, d, len(idx), norm, np.array(idx, dtype=np.int64))
        assert deserialize(serialize(qg)) == qg
