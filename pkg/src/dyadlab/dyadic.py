"""Indexing and traversal of the finite dyadic tree over [0, 1).

An interval ``[p 2^-k, (p+1) 2^-k)`` is a :class:`DyadicIndex` ``(k, p)``.
A :class:`DyadicTree` of depth ``N`` owns every interval of level ``<= N``;
its level-``N`` intervals are the *cells* on which all grid functions live.
Cell ``j`` of a depth-``N`` tree is ``DyadicIndex(N, j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import LevelOverflowError

__all__ = [
    "DyadicIndex",
    "DyadicTree",
    "ceil_log2",
    "floor_log2",
    "parse_index",
    "subtree_sums",
]


@dataclass(frozen=True, order=True)
class DyadicIndex:
    level: int
    position: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        if not 0 <= self.position < (1 << self.level):
            raise ValueError(
                f"position {self.position} out of range for level {self.level}"
            )

    @property
    def measure(self) -> float:
        return 2.0 ** -self.level

    @property
    def left(self) -> float:
        return self.position * 2.0 ** -self.level

    @property
    def right(self) -> float:
        return (self.position + 1) * 2.0 ** -self.level

    def parent(self) -> DyadicIndex:
        if self.level == 0:
            raise ValueError("the root has no parent")
        return DyadicIndex(self.level - 1, self.position >> 1)

    def contains(self, other: DyadicIndex) -> bool:
        """True if ``other`` is a (non-strict) subinterval of ``self``."""
        shift = other.level - self.level
        return shift >= 0 and (other.position >> shift) == self.position

    def cell_range(self, depth: int) -> range:
        """Indices of the depth-``depth`` cells that make up this interval."""
        if self.level > depth:
            raise LevelOverflowError(f"{self} is finer than depth {depth}")
        width = 1 << (depth - self.level)
        return range(self.position * width, (self.position + 1) * width)

    def __str__(self) -> str:
        return f"{self.level}:{self.position}"


def parse_index(text: str) -> DyadicIndex:
    """Inverse of ``str(DyadicIndex)``: ``"3:5"`` -> ``DyadicIndex(3, 5)``."""
    try:
        k, p = text.split(":")
        return DyadicIndex(int(k), int(p))
    except (ValueError, AttributeError) as exc:
        raise ValueError(f"malformed dyadic index {text!r}") from exc


ROOT = DyadicIndex(0, 0)


@dataclass(frozen=True)
class DyadicTree:
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError(f"negative depth {self.depth}")

    @property
    def n_cells(self) -> int:
        return 1 << self.depth

    def cells(self) -> list[DyadicIndex]:
        return [DyadicIndex(self.depth, j) for j in range(self.n_cells)]

    def check(self, index: DyadicIndex) -> DyadicIndex:
        if index.level > self.depth:
            raise LevelOverflowError(
                f"interval {index} is below tree depth {self.depth}"
            )
        return index

    def children(self, index: DyadicIndex) -> tuple[DyadicIndex, DyadicIndex]:
        if index.level >= self.depth:
            raise LevelOverflowError(
                f"interval {index} is at the tree depth {self.depth} and has no children"
            )
        k, p = index.level + 1, 2 * index.position
        return DyadicIndex(k, p), DyadicIndex(k, p + 1)

    def ancestors(self, cell: DyadicIndex) -> list[DyadicIndex]:
        """The ``N + 1`` intervals containing ``cell``, root first, cell last."""
        if cell.level != self.depth:
            raise ValueError(f"{cell} is not a cell of a depth-{self.depth} tree")
        return [
            DyadicIndex(k, cell.position >> (self.depth - k))
            for k in range(self.depth + 1)
        ]

    def descendants(
        self, index: DyadicIndex, max_level: int | None = None
    ) -> Iterator[DyadicIndex]:
        """Every ``J`` inside ``index`` with ``J.level <= max_level``, level by level."""
        max_level = self.depth if max_level is None else max_level
        if not index.level <= max_level <= self.depth:
            raise LevelOverflowError(
                f"max_level {max_level} outside [{index.level}, {self.depth}]"
            )
        for k in range(index.level, max_level + 1):
            width = 1 << (k - index.level)
            start = index.position * width
            for p in range(start, start + width):
                yield DyadicIndex(k, p)

    def intervals(self) -> Iterator[DyadicIndex]:
        """All ``2^(N+1) - 1`` intervals of the tree, root first."""
        return self.descendants(ROOT, self.depth)


def subtree_sums(per_level: Sequence[np.ndarray]) -> list[np.ndarray]:
    """For per-level arrays ``x[k]`` of shape ``(2^k, ...)``, return
    ``out[k][p] = sum of x[j][q] over all (j, q) inside (k, p)``.
    """
    out = [None] * len(per_level)
    out[-1] = np.asarray(per_level[-1], dtype=float)
    for k in range(len(per_level) - 2, -1, -1):
        below = out[k + 1]
        out[k] = per_level[k] + below.reshape((1 << k, 2) + below.shape[1:]).sum(axis=1)
    return out


def floor_log2(x: float) -> int:
    """Exact ``floor(log2(x))`` for ``x > 0``."""
    mant, exp = math.frexp(x)
    return exp - 1


def ceil_log2(x: float) -> int:
    """Exact ``ceil(log2(x))`` for ``x > 0``; powers of two map to their own exponent."""
    mant, exp = math.frexp(x)
    return exp - 1 if mant == 0.5 else exp
