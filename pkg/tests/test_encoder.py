import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqsgd.encoder import (
    CoeffVector,
    encode,
    encode_cross_polytope,
    encode_hadamard,
    encode_iterative,
    encode_reed_muller,
    encode_simplex,
    pad_to_valid,
    reconstruct,
)
from vqsgd.errors import BallViolation, DimensionConstraint, NoConvergence
from vqsgd.hadamard import sylvester
from vqsgd.pointset import (
    Family,
    PointSet,
    build_cross_polytope,
    build_gaussian,
    build_hadamard,
    build_reed_muller,
    build_scaled_cross_polytope,
    build_simplex,
)


def random_ball(rng, d, n=1):
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.uniform(0, 1, (n, 1)) ** (1 / d)


def explicit_copy(ps):
    return PointSet(Family.EPS_NET, ps.d, ps.m, ps.R, ps.d, np.array(ps.points))


def assert_valid(ps, a, v, atol=1e-9):
    assert a.a.min() >= 0
    assert abs(a.a.sum() - 1) <= 1e-9
    np.testing.assert_allclose(reconstruct(ps, a), v, atol=atol)


class TestCrossPolytope:
    def test_unit_axis(self):
        a = encode_cross_polytope(np.array([1.0, 0, 0, 0]))
        np.testing.assert_allclose(a.a, [0.5625] + [0.0625] * 7, atol=1e-15)

    def test_zero(self):
        np.testing.assert_allclose(encode_cross_polytope(np.zeros(4)).a, np.full(8, 1 / 8))

    def test_mixed_signs(self):
        a = encode_cross_polytope(np.array([0.5, -0.5, 0, 0])).a
        expected = np.full(8, 0.0625)
        expected[[0, 5]] = 0.3125
        np.testing.assert_allclose(a, expected, atol=1e-15)

    def test_scaled_reconstruction(self):
        v = np.array([0.6, -0.8, 0.0, 0.0])
        a = encode_cross_polytope(v, scaled=True)
        assert_valid(build_scaled_cross_polytope(4), a, v)

    def test_ball_violation(self):
        with pytest.raises(BallViolation):
            encode_cross_polytope(np.array([1.0, 1e-4, 0, 0]))


class TestSimplex:
    def test_zero(self):
        np.testing.assert_allclose(encode_simplex(np.zeros(4)).a, [1 / 3] + [1 / 6] * 4)

    def test_unit_axis(self):
        a = encode_simplex(np.array([1.0, 0, 0, 0])).a
        np.testing.assert_allclose(a, [7 / 24, 0.125 + 7 / 48, 7 / 48, 7 / 48, 7 / 48], atol=1e-15)

    @pytest.mark.parametrize("d", [4, 16, 64])
    def test_matches_linear_solve(self, d):
        # d+1 affinely independent points: the decomposition is unique
        ps = build_simplex(d)
        v = random_ball(np.random.default_rng(d), d)[0]
        M = np.vstack((ps.points.T, np.ones(d + 1)))
        oracle = np.linalg.solve(M, np.append(v, 1.0))
        np.testing.assert_allclose(encode_simplex(v).a, oracle, atol=1e-12)

    @pytest.mark.parametrize("d", [4, 16, 64])
    def test_anchor_coefficient_range(self, d):
        x = random_ball(np.random.default_rng(1), d, 2000)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        a0 = np.array([encode_simplex(v).a[0] for v in x])
        half = 1 / (6 * math.sqrt(d))
        assert a0.min() >= 1 / 3 - half - 1e-12
        assert a0.max() <= 1 / 3 + half + 1e-12


class TestHadamard:
    def test_zero(self):
        np.testing.assert_allclose(encode_hadamard(np.zeros(3)).a, np.full(4, 0.25))

    def test_unit_axis(self):
        a = encode_hadamard(np.array([1.0, 0, 0]))
        np.testing.assert_allclose(a.a, [0.322169, 0.177831, 0.322169, 0.177831], atol=1e-6)
        np.testing.assert_allclose(reconstruct(build_hadamard(3), a), [1, 0, 0], atol=1e-9)

    @pytest.mark.parametrize("d", [3, 7, 15, 31, 63, 127, 255])
    def test_fast_matches_naive(self, d):
        v = random_ball(np.random.default_rng(d), d)[0]
        H = sylvester(d + 1)
        naive = np.array([(1 + H[1:, i] @ v / (2 * math.sqrt(d))) / (d + 1) for i in range(d + 1)])
        np.testing.assert_allclose(encode_hadamard(v).a, naive, atol=1e-12)

    def test_requires_padding(self):
        with pytest.raises(DimensionConstraint):
            encode_hadamard(np.zeros(5))


class TestReedMuller:
    def test_zero(self):
        np.testing.assert_allclose(encode_reed_muller(np.zeros(2)).a, np.full(4, 0.25))

    def test_unit_axis(self):
        np.testing.assert_allclose(encode_reed_muller(np.array([1.0, 0])).a, [0.5, 0.5, 0, 0])

    @pytest.mark.parametrize("d", [2, 8, 64])
    def test_signed_difference_is_delta(self, d):
        v = random_ball(np.random.default_rng(d), d)[0]
        a = encode_reed_muller(v).a
        delta = sylvester(d) @ v / d
        assert np.abs(delta).sum() <= np.linalg.norm(v) + 1e-12
        np.testing.assert_allclose(a[:d] - a[d:], delta, atol=1e-15)

    def test_requires_power_of_two(self):
        with pytest.raises(DimensionConstraint):
            encode_reed_muller(np.zeros(6))


class TestIterative:
    def test_explicit_cross_polytope(self):
        ps = explicit_copy(build_cross_polytope(4))
        v = np.array([1.0, 0, 0, 0])
        a = encode_iterative(ps, v)
        assert_valid(ps, a, v, atol=1e-6)
        closed = reconstruct(build_cross_polytope(4), encode_cross_polytope(v))
        np.testing.assert_allclose(reconstruct(ps, a), closed, atol=1e-6)

    def test_zero_symmetric(self):
        ps = explicit_copy(build_cross_polytope(5))
        a = encode_iterative(ps, np.zeros(5), max_iters=ps.m)
        assert_valid(ps, a, np.zeros(5), atol=1e-6)

    def test_gaussian_set(self):
        ps = build_gaussian(8, 6, seed=0, cardinality_override=2000)
        rng = np.random.default_rng(5)
        for v in random_ball(rng, 8, 10):
            v /= np.linalg.norm(v)
            assert_valid(ps, encode_iterative(ps, v), v, atol=1e-6)

    def test_no_convergence(self):
        pts = np.array([[1.0, 0], [-1.0, 0]])
        ps = PointSet(Family.EPS_NET, 2, 2, 1.0, 2, pts)
        with pytest.raises(NoConvergence):
            encode_iterative(ps, np.array([0.0, 1.0]), max_iters=50)


class TestPadding:
    def test_examples(self):
        padded, d = pad_to_valid(np.ones(5) / 3, Family.HADAMARD)
        assert (len(padded), d) == (7, 5)
        assert len(pad_to_valid(np.zeros(5), Family.REED_MULLER)[0]) == 8
        assert len(pad_to_valid(np.zeros(3), Family.HADAMARD)[0]) == 3
        np.testing.assert_array_equal(padded[5:], 0)

    def test_norm_preserved(self):
        v = np.random.default_rng(0).standard_normal(10)
        padded, _ = pad_to_valid(v, Family.HADAMARD)
        assert np.linalg.norm(padded) == np.linalg.norm(v)


class TestReconstruct:
    def test_uniform_cross_polytope(self):
        ps = build_cross_polytope(6)
        a = CoeffVector(np.full(12, 1 / 12), 6, Family.CROSS_POLYTOPE)
        np.testing.assert_allclose(reconstruct(ps, a), np.zeros(6), atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            reconstruct(build_cross_polytope(3), CoeffVector(np.ones(5) / 5, 3, Family.CROSS_POLYTOPE))


CLOSED = [
    build_cross_polytope(16),
    build_scaled_cross_polytope(16),
    build_simplex(16),
    build_hadamard(15),
    build_reed_muller(16),
]


class TestRoundTrip:
    @pytest.mark.parametrize("ps", CLOSED, ids=lambda p: p.family.name)
    def test_random_ball(self, ps):
        rng = np.random.default_rng(42)
        for v in random_ball(rng, ps.d, 1000):
            assert_valid(ps, encode(ps, v), v)

    @pytest.mark.parametrize("ps", CLOSED, ids=lambda p: p.family.name)
    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_hypothesis(self, ps, data):
        raw = data.draw(
            st.lists(st.floats(-1, 1, allow_nan=False), min_size=ps.d, max_size=ps.d)
        )
        v = np.array(raw)
        n = np.linalg.norm(v)
        if n > 1:
            v /= n
        assert_valid(ps, encode(ps, v), v)
