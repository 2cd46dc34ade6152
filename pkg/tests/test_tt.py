import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttvqc.tt import (
    TTLayer,
    TTShape,
    TTShapeError,
    exact_tt_ranks,
    tt_backward,
    tt_decompose,
    tt_forward,
    tt_param_count,
    tt_reconstruct,
)


def random_layer(in_dims, out_dims, ranks, seed=0):
    return TTLayer.random(TTShape(in_dims, out_dims, ranks), np.random.default_rng(seed))


def entry_by_product(layer, j_idx, i_idx):
    m = np.eye(1)
    for core, i, j in zip(layer.cores, i_idx, j_idx):
        m = m @ core[:, i, j, :]
    return m[0, 0]


@st.composite
def layers(draw):
    k = draw(st.integers(1, 3))
    in_dims = tuple(draw(st.lists(st.integers(1, 4), min_size=k, max_size=k)))
    out_dims = tuple(draw(st.lists(st.integers(1, 3), min_size=k, max_size=k)))
    inner = draw(st.lists(st.integers(1, 3), min_size=k - 1, max_size=k - 1))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_layer(in_dims, out_dims, (1, *inner, 1), seed), seed


class TestShape:
    def test_boundary_ranks(self):
        with pytest.raises(TTShapeError):
            TTShape((2, 2), (2, 2), (2, 2, 1))

    def test_rank_count(self):
        with pytest.raises(TTShapeError):
            TTShape((2, 2), (2, 2), (1, 1))

    def test_core_extents_checked(self):
        shape = TTShape((2,), (3,), (1, 1))
        with pytest.raises(TTShapeError, match="extents"):
            TTLayer(shape, [np.zeros((1, 3, 2, 1))])

    def test_nonfinite_core_rejected(self):
        shape = TTShape((2,), (2,), (1, 1))
        with pytest.raises(ValueError):
            TTLayer(shape, [np.full((1, 2, 2, 1), np.nan)])


class TestForward:
    def test_order_one_is_plain_matrix(self):
        w = np.arange(6.0).reshape(3, 2)  # J x I
        layer = TTLayer(TTShape((2,), (3,), (1, 1)), [w.T.reshape(1, 2, 3, 1)])
        x = np.array([0.5, -2.0])
        np.testing.assert_allclose(tt_forward(layer, x), w @ x, rtol=0, atol=1e-14)

    def test_zero_cores(self):
        layer = TTLayer.zeros(TTShape((2, 3), (2, 2), (1, 2, 1)))
        assert not np.any(tt_forward(layer, np.ones((2, 3))))

    def test_matches_dense_reconstruction(self):
        layer = random_layer((2, 3, 2), (2, 2, 2), (1, 2, 2, 1), seed=4)
        x = np.random.default_rng(5).normal(size=(2, 3, 2))
        dense = tt_reconstruct(layer) @ x.reshape(-1)
        out = tt_forward(layer, x)
        assert np.linalg.norm(out - dense) <= 1e-10 * np.linalg.norm(dense)

    def test_batch_equals_single(self):
        layer = random_layer((2, 3, 2), (2, 2, 2), (1, 2, 2, 1), seed=1)
        xs = np.random.default_rng(2).normal(size=(5, 2, 3, 2))
        batched = tt_forward(layer, xs)
        for b in range(5):
            np.testing.assert_allclose(batched[b], tt_forward(layer, xs[b]), rtol=1e-13, atol=1e-15)

    def test_shape_mismatch(self):
        layer = random_layer((2, 3), (2, 2), (1, 2, 1))
        with pytest.raises(TTShapeError, match="input"):
            tt_forward(layer, np.ones((3, 2)))

    @settings(max_examples=40, deadline=None)
    @given(layers())
    def test_oracle_equivalence(self, case):
        layer, seed = case
        x = np.random.default_rng(seed + 1).normal(size=layer.shape.input_dims)
        dense = tt_reconstruct(layer) @ x.reshape(-1)
        out = tt_forward(layer, x)
        assert np.linalg.norm(out - dense) <= 1e-10 * max(np.linalg.norm(dense), 1e-300)

    @settings(max_examples=40, deadline=None)
    @given(layers(), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, case, a, b):
        layer, seed = case
        rng = np.random.default_rng(seed + 2)
        x = rng.normal(size=layer.shape.input_dims)
        y = rng.normal(size=layer.shape.input_dims)
        lhs = tt_forward(layer, a * x + b * y)
        rhs = a * tt_forward(layer, x) + b * tt_forward(layer, y)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10 * (1 + np.abs(rhs).max()))


class TestReconstruct:
    def test_ones(self):
        layer = TTLayer(TTShape((2, 3), (3, 2), (1, 1, 1)), [np.ones((1, 2, 3, 1)), np.ones((1, 3, 2, 1))])
        np.testing.assert_array_equal(tt_reconstruct(layer), np.ones((6, 6)))

    def test_entries_match_ordered_product(self):
        layer = random_layer((2, 2), (2, 2), (1, 2, 1), seed=7)
        full = tt_reconstruct(layer)
        for i1, i2, j1, j2 in itertools.product(range(2), repeat=4):
            assert full[j1 * 2 + j2, i1 * 2 + i2] == pytest.approx(
                entry_by_product(layer, (j1, j2), (i1, i2)), abs=1e-14
            )

    def test_row_major_flattening_uneven_dims(self):
        layer = random_layer((2, 3), (3, 2), (1, 2, 1), seed=8)
        full = tt_reconstruct(layer)
        for i1, i2, j1, j2 in itertools.product(range(2), range(3), range(3), range(2)):
            assert full[j1 * 2 + j2, i1 * 3 + i2] == pytest.approx(
                entry_by_product(layer, (j1, j2), (i1, i2)), abs=1e-14
            )

    def test_order_one(self):
        core = np.random.default_rng(0).normal(size=(1, 3, 2, 1))
        layer = TTLayer(TTShape((3,), (2,), (1, 1)), [core])
        np.testing.assert_array_equal(tt_reconstruct(layer), core[0, :, :, 0].T)


class TestBackward:
    def test_zero_upstream(self):
        layer = random_layer((2, 3), (2, 2), (1, 2, 1))
        gx, gc = tt_backward(layer, np.ones((2, 3)), np.zeros(4))
        assert not np.any(gx) and not any(np.any(g) for g in gc)

    def test_order_one_outer_product(self):
        rng = np.random.default_rng(3)
        core = rng.normal(size=(1, 3, 2, 1))
        layer = TTLayer(TTShape((3,), (2,), (1, 1)), [core])
        x, u = rng.normal(size=3), rng.normal(size=2)
        gx, (gc,) = tt_backward(layer, x, u)
        w = core[0, :, :, 0].T
        np.testing.assert_allclose(gx, w.T @ u, atol=1e-14)
        np.testing.assert_allclose(gc[0, :, :, 0], np.outer(x, u), atol=1e-14)

    def test_upstream_length_checked(self):
        layer = random_layer((2, 3), (2, 2), (1, 2, 1))
        with pytest.raises(TTShapeError):
            tt_backward(layer, np.ones((2, 3)), np.ones(3))

    @settings(max_examples=15, deadline=None)
    @given(layers())
    def test_finite_differences(self, case):
        layer, seed = case
        rng = np.random.default_rng(seed + 3)
        x = rng.normal(size=layer.shape.input_dims)
        u = rng.normal(size=layer.shape.out_size)
        gx, gc = tt_backward(layer, x, u)
        h = 1e-5

        def f(lay, inp):
            return float(u @ tt_forward(lay, inp))

        for idx in np.ndindex(x.shape):
            xp, xm = x.copy(), x.copy()
            xp[idx] += h
            xm[idx] -= h
            fd = (f(layer, xp) - f(layer, xm)) / (2 * h)
            assert abs(fd - gx[idx]) <= 1e-5 * max(1.0, abs(fd))
        for k, core in enumerate(layer.cores):
            for idx in np.ndindex(core.shape):
                lp, lm = layer.copy(), layer.copy()
                lp.cores[k][idx] += h
                lm.cores[k][idx] -= h
                fd = (f(lp, x) - f(lm, x)) / (2 * h)
                assert abs(fd - gc[k][idx]) <= 1e-5 * max(1.0, abs(fd))

    def test_batch_accumulates(self):
        layer = random_layer((2, 3, 2), (2, 2, 2), (1, 2, 2, 1), seed=9)
        rng = np.random.default_rng(10)
        xs, us = rng.normal(size=(4, 2, 3, 2)), rng.normal(size=(4, 8))
        _, total = tt_backward(layer, xs, us)
        singles = [tt_backward(layer, xs[b], us[b])[1] for b in range(4)]
        for k in range(3):
            np.testing.assert_allclose(total[k], sum(s[k] for s in singles), atol=1e-12)


class TestDecompose:
    def test_rank_one(self):
        rng = np.random.default_rng(0)
        vs = [rng.normal(size=n) for n in (3, 4, 2)]
        t = np.einsum("a,b,c->abc", *vs)
        tv = tt_decompose(t, (1, 1, 1, 1))
        assert np.max(np.abs(tv.full() - t)) <= 1e-8 * np.max(np.abs(t))
        assert tv.error <= 1e-8

    def test_zero_tensor(self):
        tv = tt_decompose(np.zeros((2, 3, 2)), (1, 2, 2, 1))
        assert tv.error == 0.0
        assert not any(np.any(c) for c in tv.cores[-1:])
        np.testing.assert_array_equal(tv.full(), 0.0)

    def test_random_at_exact_ranks(self):
        t = np.random.default_rng(1).normal(size=(2, 3, 2))
        ranks = exact_tt_ranks(t)
        assert ranks == (1, 2, 2, 1)
        tv = tt_decompose(t, ranks)
        assert np.linalg.norm(tv.full() - t) <= 1e-8 * np.linalg.norm(t)

    def test_truncation_reports_error(self):
        t = np.random.default_rng(2).normal(size=(3, 3, 3))
        tv = tt_decompose(t, (1, 1, 1, 1))
        expected = np.linalg.norm(tv.full() - t) / np.linalg.norm(t)
        assert tv.error == pytest.approx(expected)
        assert tv.error > 0.1

    def test_rank_exceeds_unfolding(self):
        with pytest.raises(TTShapeError, match="exceeds"):
            tt_decompose(np.ones((2, 3, 2)), (1, 3, 2, 1))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(1, 4), min_size=2, max_size=4), st.integers(0, 2**32 - 1))
    def test_round_trip_at_exact_ranks(self, dims, seed):
        t = np.random.default_rng(seed).normal(size=dims)
        tv = tt_decompose(t, exact_tt_ranks(t))
        assert np.linalg.norm(tv.full() - t) <= 1e-8 * np.linalg.norm(t)


class TestParamCount:
    def test_mnist_layout(self):
        layer = TTLayer.zeros(TTShape((7, 16, 7), (2, 2, 2), (1, 3, 3, 1)))
        assert tt_param_count(layer) == 42 + 288 + 42 == 372

    def test_order_one(self):
        assert tt_param_count(TTLayer.zeros(TTShape((5,), (3,), (1, 1)))) == 15

    def test_unit_dims(self):
        assert tt_param_count(TTLayer.zeros(TTShape((1,) * 4, (1,) * 4, (1,) * 5))) == 4
