"""Weight families and random test objects.

Randomness comes from numpy's ``PCG64`` bit generator via
``numpy.random.default_rng(seed)``; streams are identical for identical
seeds on every platform numpy supports.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from ..carleson import CarlesonSequence
from ..dyadic import DyadicIndex
from ..seqspaces import MatrixSequence
from ..weights import GridVectorFn, MatrixWeight, symmetrize

__all__ = [
    "FAMILIES",
    "WeightSpec",
    "gen_weight",
    "power_cell_averages",
    "random_carleson",
    "random_function",
    "random_matrix_sequence",
    "random_symmetric",
]

FAMILIES = ("identity", "scalar-power", "rotated-pair", "log-walk", "random-spd")


@dataclass(frozen=True)
class WeightSpec:
    family: Literal["identity", "scalar-power", "rotated-pair", "log-walk", "random-spd"] = "identity"
    alpha: float = 0.0
    center: float = 0.0
    theta: float = 0.0
    sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown weight family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("scalar-power", "rotated-pair") and not -1.0 < self.alpha < 1.0:
            raise ValueError(f"power exponent {self.alpha} outside (-1, 1)")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    @classmethod
    def from_dict(cls, data: dict) -> WeightSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown weight spec keys {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _abs_power_integral(a: np.ndarray, b: np.ndarray, c: float, alpha: float) -> np.ndarray:
    """``integral_a^b |x - c|^alpha dx`` in closed form (``alpha > -1``)."""
    beta = alpha + 1.0
    left = np.clip(c - a, 0.0, None) ** beta - np.clip(c - b, 0.0, None) ** beta
    right = np.clip(b - c, 0.0, None) ** beta - np.clip(a - c, 0.0, None) ** beta
    return (left + right) / beta


def power_cell_averages(depth: int, alpha: float, center: float = 0.0) -> np.ndarray:
    """Exact cell averages of ``|x - center|^alpha`` on the depth-``depth`` grid."""
    n = 1 << depth
    if alpha == 0.0:
        return np.ones(n)
    edges = np.arange(n + 1) / n
    return _abs_power_integral(edges[:-1], edges[1:], center, alpha) * n


def random_symmetric(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    shape = (dim, dim) if size is None else (size, dim, dim)
    Z = rng.standard_normal(shape)
    return symmetrize(Z)


def _sym_exp(H: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(H)
    return symmetrize((evecs * np.exp(evals)[..., None, :]) @ np.swapaxes(evecs, -1, -2))


def gen_weight(spec: WeightSpec, depth: int, dim: int, seed: int = 0) -> MatrixWeight:
    """Instantiate a weight family on the depth-``depth`` grid.

    * ``identity``: every cell is ``I_d``.
    * ``scalar-power``: exact cell averages of ``|x - center|^alpha`` times ``I_d``.
    * ``rotated-pair``: ``R(theta) diag(p_alpha, p_-alpha) R(theta)^T`` in the
      first two coordinates (identity elsewhere), ``p_beta`` being the exact
      cell averages of ``|x - center|^beta``. Needs ``dim >= 2``.
    * ``log-walk``: ``exp(H_j)`` along a symmetric random walk ``H_j`` with
      Gaussian steps of size ``sigma`` started at ``H_0 = 0``.
    * ``random-spd``: independent ``exp(sigma G_j)`` per cell.
    """
    n = 1 << depth
    if spec.family == "identity":
        return MatrixWeight.identity(depth, dim)
    if spec.family == "scalar-power":
        p = power_cell_averages(depth, spec.alpha, spec.center)
        return MatrixWeight(p[:, None, None] * np.eye(dim))
    if spec.family == "rotated-pair":
        if dim < 2:
            raise ValueError("rotated-pair weights need dim >= 2")
        p = power_cell_averages(depth, spec.alpha, spec.center)
        q = power_cell_averages(depth, -spec.alpha, spec.center)
        cos, sin = np.cos(spec.theta), np.sin(spec.theta)
        R = np.array([[cos, -sin], [sin, cos]])
        block = np.einsum("ij,cj,kj->cik", R, np.stack([p, q], axis=1), R)
        cells = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy()
        cells[:, :2, :2] = symmetrize(block)
        return MatrixWeight(cells)
    rng = np.random.default_rng(seed if spec.seed is None else spec.seed)
    steps = spec.sigma * random_symmetric(rng, dim, n)
    if spec.family == "log-walk":
        steps[0] = 0.0
        return MatrixWeight(_sym_exp(np.cumsum(steps, axis=0)))
    return MatrixWeight(_sym_exp(steps))


def random_function(depth: int, dim: int, rng: np.random.Generator) -> GridVectorFn:
    """Gaussian cells with a random fraction zeroed, so averages vary in size."""
    cells = rng.standard_normal((1 << depth, dim))
    cells *= rng.random((1 << depth, 1)) < rng.uniform(0.3, 1.0)
    if not cells.any():
        cells[rng.integers(1 << depth)] = rng.standard_normal(dim)
    return GridVectorFn(cells)


def _random_support(depth: int, rng: np.random.Generator, density: float) -> list[DyadicIndex]:
    return [
        DyadicIndex(k, p)
        for k in range(depth + 1)
        for p in range(1 << k)
        if rng.random() < density
    ]


def random_carleson(
    depth: int, dim: int, rng: np.random.Generator, density: float = 0.3
) -> CarlesonSequence:
    """PSD matrices of random rank and scale on a random set of intervals."""
    entries = {}
    for I in _random_support(depth, rng, density):
        rank = int(rng.integers(1, dim + 1))
        G = rng.standard_normal((dim, rank))
        entries[I] = symmetrize(G @ G.T) * I.measure * np.exp(rng.normal(0.0, 1.0))
    return CarlesonSequence(depth, dim, entries)


def random_matrix_sequence(
    depth: int, dim: int, rng: np.random.Generator, density: float = 0.3
) -> MatrixSequence:
    """Arbitrary real matrices, scaled like ``|I|^(1/2)``, on a random support."""
    entries = {
        I: rng.standard_normal((dim, dim)) * np.sqrt(I.measure) * np.exp(rng.normal(0.0, 1.0))
        for I in _random_support(depth, rng, density)
    }
    return MatrixSequence(depth, dim, entries)

