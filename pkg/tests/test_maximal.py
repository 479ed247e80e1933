import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_weight
from dyadlab import (
    GridVectorFn,
    MatrixWeight,
    a2_characteristic,
    check_domination,
    maximal_aux,
    maximal_mw,
    maximal_norm_lower_bound,
)
from dyadlab.experiments.generators import power_cell_averages, random_function

seeds = st.integers(0, 2**32 - 1)


def test_identity_constant_function():
    e = np.array([1.0, -2.0, 2.0])
    f = GridVectorFn.constant(3, e)
    W = MatrixWeight.identity(3, 3)
    assert np.allclose(maximal_mw(W, f), 3.0, atol=1e-14)
    assert np.allclose(maximal_aux(W, f), 3.0, atol=1e-14)


def test_hand_example():
    W = MatrixWeight.scalar([1.0, 1.0])
    f = GridVectorFn([[0.0], [2.0]])
    assert np.allclose(maximal_mw(W, f), [1.0, 2.0], atol=1e-15)


def test_identity_weight_is_scalar_maximal_of_vector_averages():
    rng = np.random.default_rng(11)
    for d in (1, 2):
        f = random_function(4, d, rng)
        M = maximal_mw(MatrixWeight.identity(4, d), f)
        expected = np.zeros(16)
        for k, p in oracles.intervals(4):
            cells = list(oracles.cell_slice(k, p, 4))
            v = np.linalg.norm(f.cells[cells].mean(axis=0))
            expected[cells] = np.maximum(expected[cells], v)
        assert np.allclose(M, expected, atol=1e-14)
        if d == 1:
            assert np.allclose(M, oracles.scalar_maximal(f.cells[:, 0], 4), atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(0, 3), st.integers(1, 3))
def test_maximal_functions_match_oracle(seed, depth, dim):
    rng = np.random.default_rng(seed)
    W = random_weight(rng, depth, dim)
    f = random_function(depth, dim, rng)
    assert np.allclose(maximal_mw(W, f), oracles.maximal_mw(W.cells, f.cells, depth), rtol=1e-9)
    assert np.allclose(maximal_aux(W, f), oracles.maximal_aux(W.cells, f.cells, depth), rtol=1e-9)


def test_domination_identity():
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = random_function(4, 2, rng)
        assert check_domination(MatrixWeight.identity(4, 2), f) <= 1e-12


def test_domination_power_weight():
    W = MatrixWeight.scalar(power_cell_averages(7, 0.5))
    rng = np.random.default_rng(9)
    for _ in range(50):
        assert check_domination(W, random_function(7, 1, rng)) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(0, 5), st.integers(1, 3))
def test_domination_property(seed, depth, dim):
    rng = np.random.default_rng(seed)
    W = random_weight(rng, depth, dim)
    assert check_domination(W, random_function(depth, dim, rng)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 5), st.integers(1, 3), st.floats(-5.0, 5.0))
def test_sublinearity_and_homogeneity(seed, depth, dim, c):
    rng = np.random.default_rng(seed)
    W = random_weight(rng, depth, dim)
    f, g = random_function(depth, dim, rng), random_function(depth, dim, rng)
    fg = GridVectorFn(f.cells + g.cells)
    cf = GridVectorFn(c * f.cells)
    for op in (maximal_mw, maximal_aux):
        Mf, Mg = op(W, f), op(W, g)
        scale = 1.0 + np.max(Mf + Mg)
        assert np.all(op(W, fg) <= Mf + Mg + 1e-12 * scale)
        assert np.allclose(op(W, cf), abs(c) * Mf, rtol=1e-12, atol=1e-12 * scale)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 2))
def test_monotone_in_depth(seed, depth, dim):
    rng = np.random.default_rng(seed)
    W = random_weight(rng, depth, dim)
    f = random_function(depth, dim, rng)
    for op in (maximal_mw, maximal_aux):
        prev = np.zeros(W.n_cells)
        for m in range(depth + 1):
            cur = op(W, f, max_level=m)
            assert np.all(cur >= prev)
            prev = cur
        assert np.array_equal(prev, op(W, f))


def test_lower_bound_identity_at_least_one():
    W = MatrixWeight.identity(4, 1)
    assert maximal_norm_lower_bound("mw", W, trials=4, seed=0, sweeps=3) >= 1.0
    with pytest.raises(ValueError):
        maximal_norm_lower_bound("mw", W, trials=0)


def test_lower_bound_is_attained_by_its_witness():
    rng = np.random.default_rng(2)
    W = random_weight(rng, 3, 2)
    for kind, op in (("mw", maximal_mw), ("aux", maximal_aux)):
        r, f = maximal_norm_lower_bound(kind, W, trials=8, seed=1, sweeps=5, return_function=True)
        ratio = np.linalg.norm(op(W, f)) / np.linalg.norm(f.cells)
        assert r == pytest.approx(ratio, rel=1e-12)
        starts = np.random.default_rng(1).standard_normal((8, W.n_cells, W.dim))
        best_start = max(
            np.linalg.norm(op(W, GridVectorFn(s))) / np.linalg.norm(s) for s in starts
        )
        assert r >= best_start


def _scalar_mw_ratios(w, F):
    """||M_w f|| / ||f|| for a batch of scalar f, by explicit interval loops."""
    N = int(np.log2(len(w)))
    out = np.zeros_like(F)
    for k, p in oracles.intervals(N):
        cells = list(oracles.cell_slice(k, p, N))
        val = np.abs((np.sqrt(w[cells]) * F[:, cells]).mean(axis=1)) / np.sqrt(w[cells].mean())
        out[:, cells] = np.maximum(out[:, cells], val[:, None])
    return np.linalg.norm(out, axis=1) / np.linalg.norm(F, axis=1)


def test_lower_bound_beats_random_search():
    w = np.array([1.0, 1.0, 1.0, 4.0])
    ascent = maximal_norm_lower_bound("mw", MatrixWeight.scalar(w), trials=16, seed=0)
    best_random = _scalar_mw_ratios(w, np.random.default_rng(123).standard_normal((10_000, 4)))
    assert ascent >= best_random.max()


def test_lower_bound_over_a2_is_finite():
    rng = np.random.default_rng(8)
    for _ in range(5):
        W = random_weight(rng, 4, 2)
        r = maximal_norm_lower_bound("mw", W, trials=4, seed=0, sweeps=2)
        assert np.isfinite(r / a2_characteristic(W))
