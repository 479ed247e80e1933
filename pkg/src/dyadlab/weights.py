"""Matrix weights as piecewise-constant SPD fields on the cells of a dyadic tree.

All integrals are exact finite sums: a depth-``N`` weight is constant on each
of its ``2^N`` cells, so the average over a dyadic interval ``I`` of level
``k <= N`` is the arithmetic mean of the ``2^(N-k)`` cell matrices in ``I``.
"""

from __future__ import annotations

import json
from functools import cached_property
from pathlib import Path

import numpy as np

from .dyadic import DyadicIndex, DyadicTree
from .errors import DimensionMismatchError, NotSPDError

__all__ = [
    "SPD_TOL",
    "GridVectorFn",
    "MatrixWeight",
    "a2_characteristic",
    "a2_profile",
    "average",
    "contraction_check",
    "inverse_weight",
    "level_means",
    "reverse_holder_integral",
    "spd_power",
    "weighted_l2_norm",
]

# Relative to the largest eigenvalue of the matrix being tested.
SPD_TOL = 1e-12


def _depth_of(n_cells: int) -> int:
    depth = n_cells.bit_length() - 1
    if n_cells < 1 or (1 << depth) != n_cells:
        raise DimensionMismatchError(f"cell count {n_cells} is not a power of two")
    return depth


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def spd_power(M: np.ndarray, s: float, tol: float = SPD_TOL) -> np.ndarray:
    """``M**s`` for a symmetric positive definite ``M`` (or a stack of them).

    Computed through ``eigh``; raises :class:`NotSPDError` when an eigenvalue
    is not above ``tol`` times the largest one.
    """
    M = np.asarray(M, dtype=float)
    evals, evecs = np.linalg.eigh(symmetrize(M))
    top = evals[..., -1:]
    if np.any(evals <= tol * np.abs(top)) or np.any(top <= 0):
        raise NotSPDError(f"matrix is not positive definite (eigenvalues {evals.min():.3e})")
    out = (evecs * evals[..., None, :] ** s) @ np.swapaxes(evecs, -1, -2)
    return symmetrize(out)


def spectral_norm(M: np.ndarray) -> np.ndarray:
    """Largest singular value, batched over leading axes."""
    return np.linalg.svd(M, compute_uv=False)[..., 0]


def level_means(cells: np.ndarray, level: int) -> np.ndarray:
    """Averages of a cell array over every dyadic interval of ``level``.

    ``cells`` has shape ``(2^N, ...)``; the result has shape ``(2^level, ...)``.
    """
    n = cells.shape[0]
    depth = _depth_of(n)
    if not 0 <= level <= depth:
        raise DimensionMismatchError(f"level {level} outside [0, {depth}]")
    blocks = cells.reshape((1 << level, n >> level) + cells.shape[1:])
    return blocks.mean(axis=1)


def expand_level(values: np.ndarray, level: int, depth: int) -> np.ndarray:
    """Broadcast per-interval values at ``level`` back onto the depth cells."""
    return np.repeat(values, 1 << (depth - level), axis=0)


class MatrixWeight:
    """A field of ``d x d`` SPD matrices on the ``2^N`` cells of [0, 1).

    ``cells`` has shape ``(2^N, d, d)``. Input matrices are checked for
    finiteness, symmetry and positive definiteness, then frozen.
    ``condition`` is the largest cell condition number.
    """

    def __init__(self, cells, *, tol: float = SPD_TOL):
        arr = np.array(cells, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None, None]
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DimensionMismatchError(f"weight cells must be (2^N, d, d), got {arr.shape}")
        self.depth = _depth_of(arr.shape[0])
        self.dim = arr.shape[1]
        if not np.all(np.isfinite(arr)):
            raise ValueError("weight has non-finite entries")
        asym = np.abs(arr - np.swapaxes(arr, 1, 2)).max()
        scale = np.abs(arr).max()
        if asym > 1e-12 * max(scale, 1.0):
            raise ValueError(f"weight cells are not symmetric (asymmetry {asym:.3e})")
        evals = np.linalg.eigvalsh(arr)
        bad = evals[:, 0] <= tol * evals[:, -1]
        if np.any(bad) or np.any(evals[:, -1] <= 0):
            j = int(np.argmax(bad | (evals[:, -1] <= 0)))
            raise NotSPDError(f"cell {j} is not positive definite (eigenvalues {evals[j]})")
        arr.setflags(write=False)
        self.cells = arr
        # worst cell condition number; computed identities like <W>_I <W^-1>_I = I
        # on a single cell carry rounding of order eps * condition
        self.condition = float(np.max(evals[:, -1] / evals[:, 0]))

    # constructors -----------------------------------------------------------

    @classmethod
    def identity(cls, depth: int, dim: int) -> MatrixWeight:
        return cls.constant(depth, np.eye(dim))

    @classmethod
    def constant(cls, depth: int, matrix) -> MatrixWeight:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(np.broadcast_to(matrix, (1 << depth,) + matrix.shape))

    @classmethod
    def scalar(cls, values) -> MatrixWeight:
        return cls(np.asarray(values, dtype=float)[:, None, None])

    @classmethod
    def diagonal(cls, *scalar_cells) -> MatrixWeight:
        """Diagonal weight whose ``i``-th diagonal entry is ``scalar_cells[i]``."""
        stacked = np.stack([np.asarray(v, dtype=float) for v in scalar_cells], axis=-1)
        out = np.zeros(stacked.shape + (stacked.shape[-1],))
        idx = np.arange(stacked.shape[-1])
        out[:, idx, idx] = stacked
        return cls(out)

    # derived fields (cached; the object is immutable) ----------------------

    @property
    def tree(self) -> DyadicTree:
        return DyadicTree(self.depth)

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @cached_property
    def sqrt_cells(self) -> np.ndarray:
        return spd_power(self.cells, 0.5)

    @cached_property
    def inv_sqrt_cells(self) -> np.ndarray:
        return spd_power(self.cells, -0.5)

    @cached_property
    def inverse(self) -> MatrixWeight:
        return MatrixWeight(symmetrize(np.linalg.inv(self.cells)))

    def level_averages(self, level: int) -> np.ndarray:
        return self._level_cache[level]

    @cached_property
    def _level_cache(self) -> list[np.ndarray]:
        return [level_means(self.cells, k) for k in range(self.depth + 1)]

    def average(self, index: DyadicIndex) -> np.ndarray:
        self.tree.check(index)
        return self._level_cache[index.level][index.position]

    # comparison and serialization ------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatrixWeight):
            return NotImplemented
        return self.cells.shape == other.cells.shape and np.array_equal(self.cells, other.cells)

    __hash__ = None

    def __repr__(self) -> str:
        return f"MatrixWeight(depth={self.depth}, dim={self.dim})"

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "dim": self.dim,
            "cells": [[float(x) for x in c.ravel()] for c in self.cells],
        }

    @classmethod
    def from_dict(cls, data: dict) -> MatrixWeight:
        depth, dim = int(data["depth"]), int(data["dim"])
        cells = np.asarray(data["cells"], dtype=float)
        if cells.shape != (1 << depth, dim * dim):
            raise DimensionMismatchError(
                f"expected {1 << depth} cells of {dim * dim} entries, got {cells.shape}"
            )
        return cls(cells.reshape(1 << depth, dim, dim))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> MatrixWeight:
        return cls.from_dict(json.loads(Path(path).read_text()))


class GridVectorFn:
    """A piecewise-constant ``R^d``-valued function; ``cells`` is ``(2^N, d)``."""

    def __init__(self, cells):
        arr = np.array(cells, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DimensionMismatchError(f"vector function cells must be (2^N, d), got {arr.shape}")
        self.depth = _depth_of(arr.shape[0])
        self.dim = arr.shape[1]
        if not np.all(np.isfinite(arr)):
            raise ValueError("vector function has non-finite entries")
        arr.setflags(write=False)
        self.cells = arr

    @classmethod
    def constant(cls, depth: int, vector) -> GridVectorFn:
        vector = np.atleast_1d(np.asarray(vector, dtype=float))
        return cls(np.broadcast_to(vector, (1 << depth, vector.size)))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.cells**2) / self.cells.shape[0]))

    def __repr__(self) -> str:
        return f"GridVectorFn(depth={self.depth}, dim={self.dim})"

    def to_dict(self) -> dict:
        return {"depth": self.depth, "dim": self.dim, "cells": self.cells.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> GridVectorFn:
        depth, dim = int(data["depth"]), int(data["dim"])
        cells = np.asarray(data["cells"], dtype=float).reshape(-1, dim)
        if cells.shape[0] != 1 << depth:
            raise DimensionMismatchError(f"expected {1 << depth} cells, got {cells.shape[0]}")
        return cls(cells)


def check_compatible(W: MatrixWeight, f: GridVectorFn) -> None:
    if W.depth != f.depth or W.dim != f.dim:
        raise DimensionMismatchError(
            f"weight (depth {W.depth}, dim {W.dim}) and function "
            f"(depth {f.depth}, dim {f.dim}) do not match"
        )


def average(W: MatrixWeight, index: DyadicIndex) -> np.ndarray:
    """Exact average ``<W>_I`` over a dyadic interval of level ``<= N``."""
    return W.average(index)


def inverse_weight(W: MatrixWeight) -> MatrixWeight:
    return W.inverse


def a2_profile(W: MatrixWeight) -> list[np.ndarray]:
    """``||<W>_I^(1/2) <W^-1>_I^(1/2)||^2`` for every interval, one array per level."""
    Winv = W.inverse
    out = []
    for k in range(W.depth + 1):
        X = spd_power(W.level_averages(k), 0.5) @ spd_power(Winv.level_averages(k), 0.5)
        out.append(spectral_norm(X) ** 2)
    return out


def a2_characteristic(W: MatrixWeight) -> float:
    """The dyadic matrix A2 characteristic, maximized over all levels ``0..N``."""
    return float(max(v.max() for v in a2_profile(W)))


def weighted_l2_norm(f: GridVectorFn, W: MatrixWeight) -> float:
    """``(integral of <W(x) f(x), f(x)> dx)^(1/2)`` as an exact cell sum."""
    check_compatible(W, f)
    quad = np.einsum("ci,cij,cj->", f.cells, W.cells, f.cells)
    return float(np.sqrt(max(quad, 0.0) / W.n_cells))


def contraction_check(W: MatrixWeight, index: DyadicIndex) -> float:
    """``||<W>_I^(-1/2) <W^-1>_I^(-1/2)||``, which never exceeds 1."""
    A = spd_power(W.average(index), -0.5)
    B = spd_power(W.inverse.average(index), -0.5)
    return float(spectral_norm(A @ B))


def contraction_profile(W: MatrixWeight) -> list[np.ndarray]:
    """:func:`contraction_check` for every interval, one array per level."""
    Winv = W.inverse
    return [
        spectral_norm(
            spd_power(W.level_averages(k), -0.5) @ spd_power(Winv.level_averages(k), -0.5)
        )
        for k in range(W.depth + 1)
    ]


def reverse_holder_integral(V: MatrixWeight, index: DyadicIndex, eps: float) -> float:
    """Mean over ``I`` of ``||V(y)^(-1/2) <V>_I^(1/2)||^(2 + 2 eps)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    root = spd_power(V.average(index), 0.5)
    span = index.cell_range(V.depth)
    cells = V.inv_sqrt_cells[span.start : span.stop]
    norms = spectral_norm(cells @ root)
    return float(np.mean(norms ** (2.0 + 2.0 * eps)))
