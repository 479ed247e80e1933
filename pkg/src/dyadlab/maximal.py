"""Weighted dyadic maximal functions and empirical operator-norm lower bounds.

Grid scalar functions are plain ``(2^N,)`` float arrays indexed by cell.
"""

from __future__ import annotations

from typing import Literal

import numpy as np

from .weights import (
    GridVectorFn,
    MatrixWeight,
    check_compatible,
    expand_level,
    spd_power,
)

__all__ = [
    "check_domination",
    "maximal_aux",
    "maximal_mw",
    "maximal_norm_lower_bound",
    "mw_interval_values",
]


def mw_interval_values(W: MatrixWeight, f: GridVectorFn) -> list[np.ndarray]:
    """``||<W>_I^(-1/2) <W^(1/2) f>_I||`` for every interval, one array per level."""
    check_compatible(W, f)
    return [v[0] for v in _MWOperator(W).interval_values(f.cells[None])]


def maximal_mw(W: MatrixWeight, f: GridVectorFn, max_level: int | None = None) -> np.ndarray:
    """Cellwise ``M_W f``: sup over the ancestors of each cell of the normalized average."""
    check_compatible(W, f)
    return _MWOperator(W, max_level).apply(f.cells[None])[0]


def maximal_aux(V: MatrixWeight, f: GridVectorFn, max_level: int | None = None) -> np.ndarray:
    """Cellwise auxiliary maximal function ``sup_I mean_I ||<V>_I^(1/2) V^(-1/2) f||``."""
    check_compatible(V, f)
    return _AuxOperator(V, max_level).apply(f.cells[None])[0]


def check_domination(W: MatrixWeight, f: GridVectorFn) -> float:
    """Largest excess of ``M_W f`` over ``aux_{W^-1} f``; nonpositive up to rounding."""
    return float(np.max(maximal_mw(W, f) - maximal_aux(W.inverse, f)))


class _MWOperator:
    """Batched evaluation of ``M_W`` on stacks of functions ``(B, 2^N, d)``."""

    def __init__(self, W: MatrixWeight, max_level: int | None = None):
        self.depth = W.depth
        self.levels = range(W.depth + 1 if max_level is None else max_level + 1)
        self.root_cells = W.sqrt_cells
        self.norm_maps = [spd_power(W.level_averages(k), -0.5) for k in self.levels]

    def interval_values(self, F: np.ndarray) -> list[np.ndarray]:
        """Per-level arrays of shape ``(B, 2^k)``."""
        g = np.einsum("cij,bcj->bci", self.root_cells, F)
        out = []
        for k in self.levels:
            avg = g.reshape(g.shape[0], 1 << k, -1, g.shape[-1]).mean(axis=2)
            out.append(np.linalg.norm(np.einsum("pij,bpj->bpi", self.norm_maps[k], avg), axis=-1))
        return out

    def apply(self, F: np.ndarray) -> np.ndarray:
        out = np.zeros(F.shape[:2])
        for k, vals in zip(self.levels, self.interval_values(F)):
            np.maximum(out, np.repeat(vals, 1 << (self.depth - k), axis=1), out=out)
        return out


class _AuxOperator:
    def __init__(self, V: MatrixWeight, max_level: int | None = None):
        self.depth = V.depth
        self.levels = range(V.depth + 1 if max_level is None else max_level + 1)
        self.inv_root_cells = V.inv_sqrt_cells
        self.expanded_roots = [
            expand_level(spd_power(V.level_averages(k), 0.5), k, V.depth) for k in self.levels
        ]

    def apply(self, F: np.ndarray) -> np.ndarray:
        h = np.einsum("cij,bcj->bci", self.inv_root_cells, F)
        out = np.zeros(F.shape[:2])
        for k, roots in zip(self.levels, self.expanded_roots):
            integrand = np.linalg.norm(np.einsum("cij,bcj->bci", roots, h), axis=-1)
            means = integrand.reshape(F.shape[0], 1 << k, -1).mean(axis=2)
            np.maximum(out, np.repeat(means, 1 << (self.depth - k), axis=1), out=out)
        return out


def _ratios(op, F: np.ndarray) -> np.ndarray:
    num = np.sum(op.apply(F) ** 2, axis=1)
    den = np.sum(F**2, axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, np.sqrt(num / den), -np.inf)


def maximal_norm_lower_bound(
    kind: Literal["mw", "aux"],
    W: MatrixWeight,
    trials: int = 16,
    seed: int = 0,
    *,
    sweeps: int = 50,
    stall: float = 1e-9,
    return_function: bool = False,
):
    """Certified lower bound on the L2 operator norm of ``M_W`` or ``aux_W``.

    Draws ``trials`` Gaussian test functions, keeps the best ratio
    ``||M f|| / ||f||`` and refines it by coordinate ascent: each sweep
    perturbs one (cell, component) entry at a time, choosing the best of a
    geometric ladder of step sizes. Stops after ``sweeps`` sweeps or when a
    sweep improves the ratio by less than ``stall`` (relative).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    op = {"mw": _MWOperator, "aux": _AuxOperator}[kind](W)
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((trials, W.n_cells, W.dim))
    ratios = _ratios(op, starts)
    best = int(np.argmax(ratios))
    x, r = starts[best].copy(), float(ratios[best])

    ladder = 2.0 ** np.arange(-10, 3)
    ladder = np.concatenate([ladder, -ladder])
    for _ in range(sweeps):
        before = r
        scale = np.sqrt(np.mean(x**2))
        for c in range(W.n_cells):
            for i in range(W.dim):
                steps = np.append(scale * ladder, -x[c, i])
                batch = np.repeat(x[None], steps.size, axis=0)
                batch[:, c, i] += steps
                trial = _ratios(op, batch)
                j = int(np.argmax(trial))
                if trial[j] > r:
                    x, r = batch[j], float(trial[j])
        if r - before <= stall * r:
            break
    if return_function:
        return r, GridVectorFn(x)
    return r
