"""Carleson sequences, testing constants and exact embedding constants.

The embedding constant is the top eigenvalue of the quadratic form
``f -> sum_I <A_I <W^(1/2) f>_I, <W^(1/2) f>_I>`` relative to ``||f||_{L2}^2``.
On a depth-``N`` grid this is a symmetric eigenproblem of size ``d 2^N``:
writing ``u_c = 2^(-N/2) f_c`` turns the cell-measure metric into the
Euclidean one, so the generalized problem reduces to a standard one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicIndex, ceil_log2, subtree_sums
from .errors import DimensionMismatchError, NotSPDError
from .maximal import maximal_mw, mw_interval_values
from .seqspaces import MatrixSequence
from .weights import GridVectorFn, MatrixWeight, check_compatible, spd_power, spectral_norm

__all__ = [
    "CarlesonSequence",
    "StoppingDecomposition",
    "check_g_domination",
    "embedding_constant",
    "embedding_form",
    "embedding_matrix",
    "scalar_cet_ratio",
    "scalar_testing_constant",
    "stopping_time",
    "testing_constant_matrix",
    "testing_constant_norm",
]

PSD_TOL = 1e-12


class CarlesonSequence(MatrixSequence):
    """A :class:`MatrixSequence` whose entries are symmetric positive semidefinite."""

    def _validate(self) -> None:
        for index, mat in self.entries.items():
            scale = np.abs(mat).max()
            if np.abs(mat - mat.T).max() > 1e-12 * max(scale, 1.0):
                raise ValueError(f"entry at {index} is not symmetric")
            lo = np.linalg.eigvalsh(mat)[0]
            if lo < -PSD_TOL * max(spectral_norm(mat), 1e-300):
                raise NotSPDError(f"entry at {index} is not positive semidefinite ({lo:.3e})")


def _check(W: MatrixWeight, A: MatrixSequence) -> None:
    if W.depth != A.depth or W.dim != A.dim:
        raise DimensionMismatchError(
            f"weight (depth {W.depth}, dim {W.dim}) and sequence "
            f"(depth {A.depth}, dim {A.dim}) do not match"
        )


def testing_constant_norm(W: MatrixWeight, A: CarlesonSequence) -> float:
    """``sup_J (1/|J|) sum_{I in J} ||<W>_I^(1/2) A_I <W>_I^(1/2)||``."""
    _check(W, A)
    terms = []
    for k, arr in enumerate(A.levels):
        root = spd_power(W.level_averages(k), 0.5)
        terms.append(spectral_norm(root @ arr @ root))
    sums = subtree_sums(terms)
    return float(max((s * 2.0**k).max() for k, s in enumerate(sums)))


def testing_constant_matrix(W: MatrixWeight, A: CarlesonSequence) -> float:
    """Least ``C`` with ``(1/|J|) sum_{I in J} <W>_I A_I <W>_I <= C <W>_J`` (Loewner) for all ``J``."""
    _check(W, A)
    terms = [W.level_averages(k) @ arr @ W.level_averages(k) for k, arr in enumerate(A.levels)]
    sums = subtree_sums(terms)
    best = 0.0
    for k, s in enumerate(sums):
        inv_root = spd_power(W.level_averages(k), -0.5)
        rel = inv_root @ (s * 2.0**k) @ inv_root
        rel = 0.5 * (rel + np.swapaxes(rel, 1, 2))
        best = max(best, float(np.linalg.eigvalsh(rel)[:, -1].max()))
    return best


def embedding_matrix(W: MatrixWeight, A: CarlesonSequence) -> np.ndarray:
    """The form's matrix in scaled cell coordinates, shape ``(d 2^N, d 2^N)``.

    Block ``(c, c')`` collects ``2^(-N) |I|^(-2) W_c^(1/2) A_I W_{c'}^(1/2)``
    over the intervals ``I`` containing both cells.
    """
    _check(W, A)
    n, d, N = W.n_cells, W.dim, W.depth
    Q = np.zeros((n, d, n, d))
    roots = W.sqrt_cells
    for k, arr in enumerate(A.levels):
        active = np.flatnonzero(np.any(arr != 0, axis=(1, 2)))
        if active.size == 0:
            continue
        m = 1 << (N - k)
        scale = 2.0 ** (2 * k - N)
        blocks = roots.reshape(1 << k, m, d, d)
        for p in active:
            R = blocks[p]
            contrib = np.einsum("cai,ab,ebj->ciej", R, arr[p], R, optimize=True)
            Q[p * m : (p + 1) * m, :, p * m : (p + 1) * m, :] += scale * contrib
    Q = Q.reshape(n * d, n * d)
    return 0.5 * (Q + Q.T)


def embedding_constant(W: MatrixWeight, A: CarlesonSequence) -> float:
    """Exact least ``C1`` with ``sum_I <A_I <W^(1/2)f>_I, <W^(1/2)f>_I> <= C1 ||f||^2``."""
    Q = embedding_matrix(W, A)
    if not np.any(Q):
        return 0.0
    try:
        top = np.linalg.eigvalsh(Q)[-1]
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigen-solver failed on the embedding form: {exc}") from exc
    return float(max(top, 0.0))


def embedding_form(W: MatrixWeight, A: CarlesonSequence, f: GridVectorFn) -> float:
    """``sum_I <A_I <W^(1/2) f>_I, <W^(1/2) f>_I>`` evaluated directly from averages."""
    _check(W, A)
    check_compatible(W, f)
    g = np.einsum("cij,cj->ci", W.sqrt_cells, f.cells)
    total = 0.0
    for k, arr in enumerate(A.levels):
        avg = g.reshape(1 << k, -1, W.dim).mean(axis=1)
        total += float(np.einsum("pi,pij,pj->", avg, arr, avg))
    return total


def scalar_testing_constant(w: MatrixWeight, a: CarlesonSequence) -> float:
    """``sup_J (1/|J|) sum_{I in J} a_I <w>_I^2 / <w>_J`` for scalar ``w`` and ``a``."""
    if w.dim != 1 or a.dim != 1:
        raise DimensionMismatchError("scalar testing constant needs d = 1")
    _check(w, a)
    means = [w.level_averages(k)[:, 0, 0] for k in range(w.depth + 1)]
    terms = [a.levels[k][:, 0, 0] * means[k] ** 2 for k in range(w.depth + 1)]
    sums = subtree_sums(terms)
    return float(max((s * 2.0**k / means[k]).max() for k, s in enumerate(sums)))


def scalar_cet_ratio(w: MatrixWeight, a: CarlesonSequence) -> float:
    """``C1 / C2`` for a scalar weight; 1 when both constants vanish."""
    c2 = scalar_testing_constant(w, a)
    c1 = embedding_constant(w, a)
    if c1 == 0.0 and c2 == 0.0:
        return 1.0
    return c1 / c2


@dataclass
class StoppingDecomposition:
    """Maximal intervals per dyadic band of the normalized averages.

    ``levels[k]`` holds the maximal intervals whose value lies in
    ``(2^(k-1), 2^k]``; ``star[J]`` is the largest ``k`` such that ``J`` sits
    inside a member of ``levels[k]``; ``g`` is the cellwise sum of the
    selected values.
    """

    levels: dict[int, list[DyadicIndex]] = field(default_factory=dict)
    star: dict[DyadicIndex, int] = field(default_factory=dict)
    g: np.ndarray | None = None
    values: list[np.ndarray] = field(default_factory=list)


def stopping_time(W: MatrixWeight, f: GridVectorFn) -> StoppingDecomposition:
    values = mw_interval_values(W, f)
    N = W.depth
    dec = StoppingDecomposition(values=values, g=np.zeros(W.n_cells))
    # bands[k][p] is None for a zero average; ancestor_bands carries the bands above.
    ancestor_bands: list[frozenset] = [frozenset()]
    ancestor_star: list[int | None] = [None]
    for k in range(N + 1):
        next_bands, next_star = [], []
        for p in range(1 << k):
            above = ancestor_bands[p >> 1] if k else frozenset()
            star_above = ancestor_star[p >> 1] if k else None
            v = float(values[k][p])
            own = ceil_log2(v) if v > 0 else None
            index = DyadicIndex(k, p)
            if own is not None and own not in above:
                dec.levels.setdefault(own, []).append(index)
                dec.g[index.cell_range(N).start : index.cell_range(N).stop] += v
            bands = above | {own} if own is not None else above
            star = star_above
            if own is not None:
                star = own if star is None else max(star, own)
                dec.star[index] = star
            next_bands.append(bands)
            next_star.append(star)
        ancestor_bands, ancestor_star = next_bands, next_star
    dec.levels = dict(sorted(dec.levels.items()))
    return dec


def check_g_domination(W: MatrixWeight, f: GridVectorFn) -> float:
    """``max g(x) / M_W f(x)`` over cells where the maximal function is positive."""
    dec = stopping_time(W, f)
    M = maximal_mw(W, f)
    live = M > 0
    if not np.any(live):
        return 0.0
    return float(np.max(dec.g[live] / M[live]))
