import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import members_of, random_weight
from dyadlab import (
    DyadicIndex,
    GridVectorFn,
    MatrixWeight,
    SparseFamily,
    a2_characteristic,
    apply_sparse,
    bound_ratio,
    generate_sparse,
    is_sparse,
    packing_bound,
    packing_constant,
    proof_chain_diagnostic,
    sparse_children,
    sparse_weighted_norm,
    testing_constant_norm,
)
from dyadlab.dyadic import ROOT
from dyadlab.experiments.generators import random_function
from dyadlab.sparse import induced_sequence

seeds = st.integers(0, 2**32 - 1)
strategies = st.sampled_from(["chain", "random", "greedy-maximal"])
D = DyadicIndex


def test_is_sparse_examples():
    assert is_sparse({ROOT, D(1, 0)})
    report = is_sparse({ROOT, D(1, 0), D(1, 1)})
    assert not report
    assert report.witness == ROOT and report.child_measure == 1.0
    assert is_sparse({D(k, 0) for k in range(7)})


def test_family_rejects_non_sparse():
    with pytest.raises(ValueError, match="not sparse"):
        SparseFamily(2, {ROOT, D(1, 0), D(1, 1)})
    with pytest.raises(ValueError):
        SparseFamily(1, {D(2, 0)})


def test_sparse_children_examples():
    chain = generate_sparse(4, "chain")
    assert sparse_children(chain, ROOT) == [D(1, 0)]
    assert sparse_children(SparseFamily(3, {ROOT}), ROOT) == []
    with pytest.raises(KeyError):
        sparse_children(chain, D(1, 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 7), strategies, seeds)
def test_generated_families(depth, strategy, seed):
    F = generate_sparse(depth, strategy, seed)
    assert is_sparse(F.members)
    assert ROOT in F
    for I in F.members:
        kids = sparse_children(F, I)
        for a, J in enumerate(kids):
            assert I.contains(J) and J != I
            assert not any(J.contains(K) or K.contains(J) for K in kids[a + 1 :])
            between = [K for K in F.members if I.contains(K) and K.contains(J) and K not in (I, J)]
            assert between == []
        assert sum(J.measure for J in kids) <= 0.5 * I.measure
    p = packing_constant(F)
    assert p == pytest.approx(oracles.packing(members_of(F)), rel=1e-14)
    assert p <= 2.0 + 1e-12


def test_greedy_saturates_budget():
    F = generate_sparse(3, "greedy-maximal", seed=0)
    for I in F.members:
        kids = sparse_children(F, I)
        if I.level < 3:
            assert len(kids) == 1 and kids[0].measure == 0.5 * I.measure


@pytest.mark.parametrize("depth", range(0, 11))
def test_chain_packing_exact(depth):
    F = generate_sparse(depth, "chain")
    assert F.members == {D(k, 0) for k in range(depth + 1)}
    assert packing_constant(F) == 2.0 - 2.0**-depth
    assert packing_constant(SparseFamily(depth, {ROOT})) == 1.0


def test_packing_bound_general_c():
    assert packing_bound() == 2.0
    F = generate_sparse(6, "greedy-maximal", seed=3, c=0.25)
    assert packing_constant(F) <= packing_bound(0.25) + 1e-12
    with pytest.raises(ValueError):
        packing_bound(1.0)


def test_apply_sparse_examples():
    rng = np.random.default_rng(0)
    f = random_function(4, 2, rng)
    out = apply_sparse(SparseFamily(4, {ROOT}), f)
    assert np.allclose(out.cells, f.cells.mean(axis=0), atol=1e-15)
    assert not apply_sparse(SparseFamily(4, set()), f).cells.any()
    chain = generate_sparse(4, "chain")
    e = np.array([1.0, -2.0])
    out = apply_sparse(chain, GridVectorFn.constant(4, e))
    counts = np.array([sum(I.contains(D(4, c)) for I in chain.members) for c in range(16)])
    assert np.allclose(out.cells, counts[:, None] * e, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 5), strategies, seeds)
def test_apply_sparse_linear(depth, strategy, seed):
    rng = np.random.default_rng(seed)
    F = generate_sparse(depth, strategy, seed)
    f, g = random_function(depth, 2, rng), random_function(depth, 2, rng)
    a = rng.normal()
    lhs = apply_sparse(F, GridVectorFn(a * f.cells + g.cells)).cells
    rhs = a * apply_sparse(F, f).cells + apply_sparse(F, g).cells
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_sparse_norm_examples():
    assert sparse_weighted_norm(SparseFamily(3, {ROOT}), MatrixWeight.identity(3, 2)) == (
        pytest.approx(1.0, abs=1e-12)
    )
    # N=1, d=1: S = (1/2) [[1, 1], [1, 1]], conjugated by diag(w^(1/2)) and diag(w^(-1/2))
    w = np.array([1.0, 4.0])
    T = 0.5 * np.diag(np.sqrt(w)) @ np.ones((2, 2)) @ np.diag(1 / np.sqrt(w))
    hand = np.linalg.svd(T, compute_uv=False)[0]
    value = sparse_weighted_norm(SparseFamily(1, {ROOT}), MatrixWeight.scalar(w))
    assert value == pytest.approx(hand, rel=1e-14)
    assert value == pytest.approx(np.sqrt(2.5 * 0.625), rel=1e-14)


@pytest.mark.parametrize("depth", [2, 5, 7])
def test_sparse_norm_chain_identity_vs_power(depth):
    F = generate_sparse(depth, "chain")
    W = MatrixWeight.identity(depth, 1)
    T = oracles.sparse_matrix(members_of(F), W.cells, depth)
    expected = oracles.power_norm(T, np.random.default_rng(depth))
    assert sparse_weighted_norm(F, W) == pytest.approx(expected, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 4), st.integers(1, 2), strategies, seeds)
def test_sparse_norm_vs_assembled_oracle(depth, dim, strategy, seed):
    rng = np.random.default_rng(seed)
    W = random_weight(rng, depth, dim)
    F = generate_sparse(depth, strategy, seed)
    T = oracles.sparse_matrix(members_of(F), W.cells, depth)
    value, method = sparse_weighted_norm(F, W, with_method=True)
    assert method == "exact"
    assert value == pytest.approx(np.linalg.norm(T, 2), rel=1e-9)


def test_induced_sequence_identity_is_packing():
    F = generate_sparse(5, "random", seed=4)
    W = MatrixWeight.identity(5, 2)
    A = induced_sequence(F, W)
    for I, M in A.entries.items():
        assert np.allclose(M, I.measure * np.eye(2), atol=1e-15)
    assert testing_constant_norm(W, A) == pytest.approx(packing_constant(F), rel=1e-14)


def test_proof_chain_root_only():
    W = random_weight(np.random.default_rng(1), 3, 2)
    report = proof_chain_diagnostic(SparseFamily(3, {ROOT}), W)
    assert report.testing_f == pytest.approx(1.0, rel=1e-10)
    assert report.testing_g == pytest.approx(1.0, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5), st.integers(1, 2), strategies, seeds)
def test_proof_chain_invariants(depth, dim, strategy, seed):
    rng = np.random.default_rng(seed)
    W = random_weight(rng, depth, dim)
    F = generate_sparse(depth, strategy, seed)
    r = proof_chain_diagnostic(F, W)
    assert r.testing_f <= 2.0 + 1e-9
    assert r.testing_g <= 2.0 + 1e-9
    assert r.end_to_end_bound >= r.sparse_norm - 1e-9
    assert r.a2 == pytest.approx(a2_characteristic(W))
    assert bound_ratio(F, W) == pytest.approx(r.sparse_norm / r.a2**1.5, rel=1e-12)


def test_family_roundtrip(tmp_path):
    F = generate_sparse(5, "random", seed=9)
    path = tmp_path / "f.json"
    F.save(path)
    assert SparseFamily.load(path) == F
    assert SparseFamily.from_dict(F.to_dict()).members == F.members
