"""Sparse families of dyadic intervals and the averaging operators they define."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, NamedTuple

import numpy as np

from .carleson import CarlesonSequence, embedding_constant, testing_constant_norm
from .dyadic import DyadicIndex, DyadicTree, parse_index
from .errors import DimensionMismatchError
from .weights import (
    GridVectorFn,
    MatrixWeight,
    a2_characteristic,
    check_compatible,
    expand_level,
)

__all__ = [
    "ProofChainReport",
    "SparseFamily",
    "SparsityReport",
    "apply_sparse",
    "bound_ratio",
    "generate_sparse",
    "is_sparse",
    "packing_bound",
    "packing_constant",
    "proof_chain_diagnostic",
    "sparse_children",
    "sparse_operator_matrix",
    "sparse_weighted_norm",
]

# Dense SVD up to this many unknowns (d * 2^N); power iteration above it.
DENSE_LIMIT = 4096


class SparsityReport(NamedTuple):
    ok: bool
    witness: DyadicIndex | None = None
    child_measure: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def _nearest_member_above(members: frozenset, index: DyadicIndex) -> DyadicIndex | None:
    k, p = index.level, index.position
    while k > 0:
        k, p = k - 1, p >> 1
        candidate = DyadicIndex(k, p)
        if candidate in members:
            return candidate
    return None


def _children_map(members: frozenset) -> dict[DyadicIndex, list[DyadicIndex]]:
    out: dict[DyadicIndex, list[DyadicIndex]] = {I: [] for I in members}
    for J in members:
        parent = _nearest_member_above(members, J)
        if parent is not None:
            out[parent].append(J)
    for v in out.values():
        v.sort()
    return out


def is_sparse(members: Iterable[DyadicIndex], c: float = 0.5) -> SparsityReport:
    """Check that every member's family-children cover at most ``c`` of it.

    Returns a falsy report carrying the first violating interval (in
    level, position order) and the total measure of its children.
    """
    members = frozenset(members)
    children = _children_map(members)
    for I in sorted(members):
        total = sum(J.measure for J in children[I])
        if total > c * I.measure:
            return SparsityReport(False, I, total)
    return SparsityReport(True)


@dataclass(frozen=True)
class SparseFamily:
    depth: int
    members: frozenset[DyadicIndex]
    c: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        for I in self.members:
            if I.level > self.depth:
                raise DimensionMismatchError(f"{I} is below depth {self.depth}")
        report = is_sparse(self.members, self.c)
        if not report:
            raise ValueError(
                f"family is not sparse: children of {report.witness} "
                f"cover {report.child_measure} > {self.c} * {report.witness.measure}"
            )

    def __contains__(self, index) -> bool:
        return index in self.members

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[DyadicIndex]:
        return sorted(self.members)

    def to_dict(self) -> dict:
        return {"depth": self.depth, "members": [str(I) for I in self.sorted()]}

    @classmethod
    def from_dict(cls, data: dict, c: float = 0.5) -> SparseFamily:
        return cls(int(data["depth"]), frozenset(parse_index(s) for s in data["members"]), c)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> SparseFamily:
        return cls.from_dict(json.loads(Path(path).read_text()))


def sparse_children(F: SparseFamily, index: DyadicIndex) -> list[DyadicIndex]:
    """Maximal members of ``F`` strictly inside ``index``."""
    if index not in F:
        raise KeyError(f"{index} is not a member of the family")
    return [J for J in F.sorted() if J != index and _nearest_member_above(F.members, J) == index]


def packing_constant(F: SparseFamily) -> float:
    """``max over J in F of (1/|J|) sum_{I in F, I inside J} |I|``."""
    if not F.members:
        return 0.0
    inside = {J: J.measure for J in F.members}
    for I in F.members:
        above = _nearest_member_above(F.members, I)
        while above is not None:
            inside[above] += I.measure
            above = _nearest_member_above(F.members, above)
    return max(total / J.measure for J, total in inside.items())


def generate_sparse(
    depth: int,
    strategy: Literal["chain", "random", "greedy-maximal"] = "random",
    seed: int = 0,
    c: float = 0.5,
) -> SparseFamily:
    """Build a sparse family rooted at [0, 1).

    ``chain`` is ``{(k, 0) : k <= depth}``. ``random`` works top-down: each
    member draws candidate subintervals at random levels and positions and
    admits them while they stay disjoint and the measure budget ``c |I|``
    holds, stopping at the first candidate that would overflow it.
    ``greedy-maximal`` fills each budget with the largest free dyadic
    subintervals, chosen at random, so every member saturates ``c |I|`` as
    far as the depth permits.
    """
    tree = DyadicTree(depth)
    root = DyadicIndex(0, 0)
    if strategy == "chain":
        return SparseFamily(depth, frozenset(DyadicIndex(k, 0) for k in range(depth + 1)), c)
    rng = np.random.default_rng(seed)
    if strategy == "random":
        pick = _random_children
    elif strategy == "greedy-maximal":
        pick = _greedy_children
    else:
        raise ValueError(f"unknown sparse strategy {strategy!r}")
    members = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for I in frontier:
            if I.level < tree.depth:
                kids = pick(I, depth, c, rng)
                members.update(kids)
                nxt.extend(kids)
        frontier = sorted(nxt)
    return SparseFamily(depth, frozenset(members), c)


def _overlaps(J: DyadicIndex, chosen: list[DyadicIndex]) -> bool:
    return any(K.contains(J) or J.contains(K) for K in chosen)


def _random_children(I, depth, c, rng) -> list[DyadicIndex]:
    chosen: list[DyadicIndex] = []
    budget = c * I.measure
    used = 0.0
    for _ in range(4 * (depth - I.level) + 4):
        level = int(rng.integers(I.level + 1, depth + 1))
        width = 1 << (level - I.level)
        J = DyadicIndex(level, I.position * width + int(rng.integers(width)))
        if _overlaps(J, chosen):
            continue
        if used + J.measure > budget:
            break
        chosen.append(J)
        used += J.measure
    return sorted(chosen)


def _greedy_children(I, depth, c, rng) -> list[DyadicIndex]:
    chosen: list[DyadicIndex] = []
    remaining = c * I.measure
    for level in range(I.level + 1, depth + 1):
        size = 2.0**-level
        width = 1 << (level - I.level)
        order = rng.permutation(width)
        for q in order:
            if size > remaining:
                break
            J = DyadicIndex(level, I.position * width + int(q))
            if not _overlaps(J, chosen):
                chosen.append(J)
                remaining -= size
    return sorted(chosen)


def _member_levels(F: SparseFamily) -> list[np.ndarray]:
    masks = [np.zeros(1 << k, dtype=bool) for k in range(F.depth + 1)]
    for I in F.members:
        masks[I.level][I.position] = True
    return masks


def apply_sparse(F: SparseFamily, f: GridVectorFn) -> GridVectorFn:
    """``S f = sum over I in F of <f>_I 1_I``."""
    if F.depth != f.depth:
        raise DimensionMismatchError(f"family depth {F.depth} != function depth {f.depth}")
    out = np.zeros_like(f.cells)
    for k, mask in enumerate(_member_levels(F)):
        if not mask.any():
            continue
        avg = f.cells.reshape(1 << k, -1, f.dim).mean(axis=1) * mask[:, None]
        out += expand_level(avg, k, F.depth)
    return GridVectorFn(out)


def sparse_operator_matrix(F: SparseFamily, W: MatrixWeight) -> np.ndarray:
    """Matrix of ``f -> W^(1/2) S (W^(-1/2) f)`` on cell coefficients.

    The grid measure is uniform, so the L2 metric is a scalar multiple of the
    Euclidean one and the matrix's spectral norm equals the L2(W) norm of S.
    """
    if F.depth != W.depth:
        raise DimensionMismatchError(f"family depth {F.depth} != weight depth {W.depth}")
    n, d = W.n_cells, W.dim
    avg = np.zeros((n, n))
    for k, mask in enumerate(_member_levels(F)):
        m = 1 << (F.depth - k)
        for p in np.flatnonzero(mask):
            avg[p * m : (p + 1) * m, p * m : (p + 1) * m] += 1.0 / m
    left = W.sqrt_cells
    right = W.inv_sqrt_cells
    T = np.einsum("ab,aij,bjk->aibk", avg, left, right)
    return T.reshape(n * d, n * d)


def _power_norm(T: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    x = np.ones(T.shape[1]) / np.sqrt(T.shape[1])
    sigma = 0.0
    for _ in range(max_iter):
        y = T.T @ (T @ x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        new = float(np.sqrt(norm))
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    return sigma


def sparse_weighted_norm(F: SparseFamily, W: MatrixWeight, *, with_method: bool = False):
    """``||S||_{L2(W) -> L2(W)}``.

    Exact (dense SVD) when ``d 2^N <= 4096``; above that, power iteration on
    ``T^T T`` and the method is reported as ``"estimated"``.
    """
    T = sparse_operator_matrix(F, W)
    if T.shape[0] <= DENSE_LIMIT:
        value, method = float(np.linalg.svd(T, compute_uv=False)[0]) if T.size else 0.0, "exact"
    else:
        value, method = _power_norm(T), "estimated"
    return (value, method) if with_method else value


def induced_sequence(F: SparseFamily, W: MatrixWeight) -> CarlesonSequence:
    """``A_I = <W>_I^(-1) |I|`` on members of ``F``, zero elsewhere."""
    entries = {}
    for I in F.sorted():
        avg = W.average(I)
        entries[I] = np.linalg.inv(avg) * I.measure
        entries[I] = 0.5 * (entries[I] + entries[I].T)
    return CarlesonSequence(W.depth, W.dim, entries)


@dataclass(frozen=True)
class ProofChainReport:
    testing_f: float
    testing_g: float
    embedding_f: float
    embedding_g: float
    a2: float
    end_to_end_bound: float
    sparse_norm: float


def proof_chain_diagnostic(F: SparseFamily, W: MatrixWeight) -> ProofChainReport:
    """Constants along the duality argument bounding a sparse operator.

    The ``f`` side uses ``A_I = <W^-1>_I^(-1) |I|`` against the weight ``W^-1``;
    the ``g`` side uses ``<W>_I^(-1) |I|`` against ``W``. The end-to-end bound
    is ``[W]^(1/2) sqrt(C1_f C1_g)`` with both embedding constants exact.
    """
    Winv = W.inverse
    A_f = induced_sequence(F, Winv)
    A_g = induced_sequence(F, W)
    a2 = a2_characteristic(W)
    c1_f = embedding_constant(Winv, A_f)
    c1_g = embedding_constant(W, A_g)
    return ProofChainReport(
        testing_f=testing_constant_norm(Winv, A_f),
        testing_g=testing_constant_norm(W, A_g),
        embedding_f=c1_f,
        embedding_g=c1_g,
        a2=a2,
        end_to_end_bound=float(np.sqrt(a2 * c1_f * c1_g)),
        sparse_norm=sparse_weighted_norm(F, W),
    )


def bound_ratio(F: SparseFamily, W: MatrixWeight) -> float:
    """``||S||_{L2(W)} / [W]_{A2}^(3/2)``."""
    return sparse_weighted_norm(F, W) / a2_characteristic(W) ** 1.5


def packing_bound(c: float = 0.5) -> float:
    """Geometric-series bound ``1 + c + c^2 + ... = 1 / (1 - c)`` on the packing constant."""
    if not 0.0 < c < 1.0:
        raise ValueError("sparsity constant must lie in (0, 1)")
    return 1.0 / (1.0 - c)
