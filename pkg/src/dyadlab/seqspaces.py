"""Matrix sequence spaces on the dyadic tree: the square-function (H1-type)
norm, the BMO-type norm, their trace pairing, and the level-set
decomposition used to bound the pairing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .dyadic import DyadicIndex, ceil_log2, floor_log2, parse_index, subtree_sums
from .errors import DimensionMismatchError
from .weights import expand_level, spectral_norm

__all__ = [
    "MatrixSequence",
    "OmegaDecomposition",
    "check_sest",
    "duality_ratio",
    "omega_decomposition",
    "pairing",
    "s_norm",
    "square_function",
    "t_norm",
]


class MatrixSequence:
    """Finitely supported map from dyadic intervals (level ``<= depth``) to
    real ``d x d`` matrices. Absent intervals carry the zero matrix.
    """

    def __init__(self, depth: int, dim: int, entries: Mapping | None = None):
        self.depth = int(depth)
        self.dim = int(dim)
        stored: dict[DyadicIndex, np.ndarray] = {}
        for key, value in (entries or {}).items():
            index = parse_index(key) if isinstance(key, str) else key
            if index.level > self.depth:
                raise DimensionMismatchError(f"{index} is below depth {self.depth}")
            mat = np.array(value, dtype=float).reshape(self.dim, self.dim)
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"entry at {index} is not finite")
            mat.setflags(write=False)
            stored[index] = mat
        self.entries = dict(sorted(stored.items()))
        self._validate()

    def _validate(self) -> None:
        pass

    @classmethod
    def from_levels(cls, arrays) -> MatrixSequence:
        """Build from dense per-level arrays ``(2^k, d, d)``; zero matrices are dropped."""
        depth, dim = len(arrays) - 1, arrays[0].shape[-1]
        entries = {
            DyadicIndex(k, p): arr[p]
            for k, arr in enumerate(arrays)
            for p in range(arr.shape[0])
            if np.any(arr[p])
        }
        return cls(depth, dim, entries)

    @cached_property
    def levels(self) -> list[np.ndarray]:
        """Dense per-level arrays of shape ``(2^k, d, d)``."""
        out = [np.zeros((1 << k, self.dim, self.dim)) for k in range(self.depth + 1)]
        for index, mat in self.entries.items():
            out[index.level][index.position] = mat
        for arr in out:
            arr.setflags(write=False)
        return out

    def __getitem__(self, index: DyadicIndex) -> np.ndarray:
        return self.entries.get(index, np.zeros((self.dim, self.dim)))

    def __len__(self) -> int:
        return len(self.entries)

    def scaled(self, c: float) -> MatrixSequence:
        return type(self)(self.depth, self.dim, {k: c * v for k, v in self.entries.items()})

    def __add__(self, other: MatrixSequence) -> MatrixSequence:
        _check_pair(self, other)
        return type(self).from_levels([a + b for a, b in zip(self.levels, other.levels)])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(depth={self.depth}, dim={self.dim}, support={len(self)})"

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "dim": self.dim,
            "entries": [
                {"index": str(k), "matrix": [float(x) for x in v.ravel()]}
                for k, v in self.entries.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict):
        entries = {e["index"]: e["matrix"] for e in data["entries"]}
        if len(entries) != len(data["entries"]):
            raise ValueError("duplicate interval in sequence entries")
        return cls(int(data["depth"]), int(data["dim"]), entries)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check_pair(a: MatrixSequence, b: MatrixSequence) -> None:
    if a.depth != b.depth or a.dim != b.dim:
        raise DimensionMismatchError(
            f"sequences differ in shape: ({a.depth}, {a.dim}) vs ({b.depth}, {b.dim})"
        )


def square_function(S: MatrixSequence) -> np.ndarray:
    """Cellwise ``sqrt(sum over I containing x of ||S_I||^2 / |I|)``."""
    total = np.zeros(1 << S.depth)
    for k, arr in enumerate(S.levels):
        total += expand_level(spectral_norm(arr) ** 2 * 2.0**k, k, S.depth)
    return np.sqrt(total)


def s_norm(S: MatrixSequence) -> float:
    return float(np.mean(square_function(S)))


def t_norm(T: MatrixSequence) -> float:
    """``sup_J ||(1/|J|) sum_{I in J} T_I T_I^*||^(1/2)``."""
    grams = [arr @ np.swapaxes(arr, 1, 2) for arr in T.levels]
    sums = subtree_sums(grams)
    return float(np.sqrt(max((spectral_norm(s) * 2.0**k).max() for k, s in enumerate(sums))))


def pairing(S: MatrixSequence, T: MatrixSequence) -> float:
    """``sum_I Tr(S_I T_I^*)``."""
    _check_pair(S, T)
    shared = S.entries.keys() & T.entries.keys()
    return float(sum(np.sum(S.entries[I] * T.entries[I]) for I in sorted(shared)))


def duality_ratio(S: MatrixSequence, T: MatrixSequence) -> float:
    """``|pairing| / (t_norm(T) s_norm(S))``, zero when the pairing vanishes."""
    value = pairing(S, T)
    if value == 0.0:
        return 0.0
    denom = t_norm(T) * s_norm(S)
    if denom == 0.0:
        raise ZeroDivisionError("nonzero pairing against a zero-norm sequence")
    return abs(value) / denom


@dataclass
class OmegaDecomposition:
    """Level sets of the square function and the interval classes they induce.

    ``omega[k]`` and ``omega_tilde[k]`` are boolean cell masks for
    ``{S > 2^k}`` and its dyadic-maximal enlargement; ``bands[k]`` lists the
    intervals that are more than half inside ``omega[k]`` but at most half
    inside ``omega[k + 1]``.
    """

    depth: int
    square: np.ndarray
    omega: dict[int, np.ndarray] = field(default_factory=dict)
    omega_tilde: dict[int, np.ndarray] = field(default_factory=dict)
    bands: dict[int, list[DyadicIndex]] = field(default_factory=dict)

    @property
    def ks(self) -> list[int]:
        return sorted(self.omega)

    def measure(self, mask: np.ndarray) -> float:
        return float(np.count_nonzero(mask)) / (1 << self.depth)


def omega_decomposition(S: MatrixSequence) -> OmegaDecomposition:
    sq = square_function(S)
    out = OmegaDecomposition(depth=S.depth, square=sq)
    positive = sq[sq > 0]
    if positive.size == 0:
        return out
    k_lo = floor_log2(float(positive.min())) - 1
    k_hi = ceil_log2(float(positive.max()))
    masks = {k: sq > np.ldexp(1.0, k) for k in range(k_lo, k_hi + 2)}
    for k in range(k_lo, k_hi + 1):
        out.omega[k] = masks[k]
        tilde = np.zeros(sq.shape, dtype=bool)
        band = []
        for level in range(S.depth + 1):
            width = 1 << (S.depth - level)
            heavy = 2 * masks[k].reshape(1 << level, width).sum(axis=1) > width
            light_next = 2 * masks[k + 1].reshape(1 << level, width).sum(axis=1) <= width
            tilde |= expand_level(heavy, level, S.depth)
            band.extend(DyadicIndex(level, int(p)) for p in np.flatnonzero(heavy & light_next))
        out.omega_tilde[k] = tilde
        out.bands[k] = band
    return out


def check_sest(S: MatrixSequence) -> float:
    """Largest ratio ``sum_{I in B_k} ||S_I||^2 / (2^(2k+3) |enlarged Omega_k|)`` over ``k``."""
    dec = omega_decomposition(S)
    norms = [spectral_norm(arr) ** 2 for arr in S.levels]
    worst = 0.0
    for k in dec.ks:
        area = dec.measure(dec.omega_tilde[k])
        if area == 0.0:
            continue
        total = sum(norms[I.level][I.position] for I in dec.bands[k])
        worst = max(worst, total / (np.ldexp(1.0, 2 * k + 3) * area))
    return float(worst)
