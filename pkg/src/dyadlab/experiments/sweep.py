"""Corpus sweeps: build instances, evaluate every constant, gate on the
provable inequalities, and write CSV/JSON reports.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..carleson import (
    CarlesonSequence,
    check_g_domination,
    embedding_constant,
    scalar_cet_ratio,
    stopping_time,
    testing_constant_matrix,
    testing_constant_norm,
)
from ..dyadic import DyadicIndex
from ..errors import InvariantViolation
from ..maximal import check_domination, maximal_norm_lower_bound
from ..seqspaces import MatrixSequence, check_sest, duality_ratio
from ..sparse import (
    DENSE_LIMIT,
    SparseFamily,
    generate_sparse,
    packing_constant,
    proof_chain_diagnostic,
)
from ..weights import GridVectorFn, MatrixWeight, a2_characteristic, contraction_profile
from .generators import (
    WeightSpec,
    gen_weight,
    random_carleson,
    random_function,
    random_matrix_sequence,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"

COLUMNS = [
    "instance_id",
    "family",
    "alpha",
    "theta",
    "sigma",
    "depth",
    "dim",
    "a2",
    "c2_norm",
    "c2_matrix",
    "c1_exact",
    "c1_over_c2_norm",
    "scalar_ratio",
    "maximal_lower_bound",
    "maximal_over_a2",
    "sparse_norm",
    "sparse_norm_method",
    "packing",
    "bound_ratio",
    "duality_ratio",
    "testing_f",
    "testing_g",
    "end_to_end_bound",
    "domination_max",
    "contraction_max",
    "g_domination_max",
    "sest_max",
]

# Tolerances for the gate; each bound is an exact inequality on the finite grid.
# Comparisons between two computed constants scale the tolerance by max(1, size).
TOL = {
    "c2_matrix_le_c1": 1e-9,
    "scalar_ratio": 1e-9,
    "domination": 1e-10,
    "contraction": 1e-10,
    "g_domination": 1e-9,
    "sest": 1e-9,
    "packing": 1e-12,
    "proof_chain": 1e-9,
    "a2": 1e-12,
}

# Multiple of eps * cond(W) added to the a2 and contraction gates: both compare
# against identities that hold exactly only for the true inverse of each cell.
ROUNDOFF = 8.0


def _roundoff(W: MatrixWeight) -> float:
    return ROUNDOFF * np.finfo(float).eps * W.condition


@dataclass
class ExperimentConfig:
    depth: int = 4
    dim: int = 2
    seed: int = 0
    weights: list[WeightSpec] = field(default_factory=lambda: [WeightSpec("log-walk", sigma=0.5)])
    repeats: int = 1
    sparse_strategy: str = "random"
    maximal_trials: int = 4
    maximal_sweeps: int = 1
    density: float = 0.3
    jobs: int = 1
    timing: bool = False
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        self.weights = [w if isinstance(w, WeightSpec) else WeightSpec.from_dict(w) for w in self.weights]
        if self.depth < 0 or self.dim < 1:
            raise ValueError(f"invalid grid: depth {self.depth}, dim {self.dim}")
        if min(self.repeats, self.maximal_trials, self.jobs) < 1 or self.maximal_sweeps < 0:
            raise ValueError("counts must be >= 1")
        if not self.weights:
            raise ValueError("config lists no weight families")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density {self.density} outside [0, 1]")
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.sparse_strategy not in ("chain", "random", "greedy-maximal"):
            raise ValueError(f"unknown sparse strategy {self.sparse_strategy!r}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["weights"] = [w.to_dict() for w in self.weights]
        return out

    @property
    def n_instances(self) -> int:
        return len(self.weights) * self.repeats


@dataclass
class Instance:
    """Everything one report row is computed from."""

    instance_id: int
    spec: WeightSpec
    weight: MatrixWeight
    f: GridVectorFn
    carleson: CarlesonSequence
    family: SparseFamily
    S: MatrixSequence
    T: MatrixSequence
    maximal_seed: int
    maximal_trials: int = 4
    maximal_sweeps: int = 1

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "spec": self.spec.to_dict(),
            "weight": self.weight.to_dict(),
            "f": self.f.to_dict(),
            "carleson": self.carleson.to_dict(),
            "family": self.family.to_dict(),
            "S": self.S.to_dict(),
            "T": self.T.to_dict(),
            "maximal": {
                "seed": self.maximal_seed,
                "trials": self.maximal_trials,
                "sweeps": self.maximal_sweeps,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> Instance:
        m = data.get("maximal", {})
        return cls(
            instance_id=int(data.get("instance_id", 0)),
            spec=WeightSpec.from_dict(data.get("spec", {})),
            weight=MatrixWeight.from_dict(data["weight"]),
            f=GridVectorFn.from_dict(data["f"]),
            carleson=CarlesonSequence.from_dict(data["carleson"]),
            family=SparseFamily.from_dict(data["family"]),
            S=MatrixSequence.from_dict(data["S"]),
            T=MatrixSequence.from_dict(data["T"]),
            maximal_seed=int(m.get("seed", 0)),
            maximal_trials=int(m.get("trials", 4)),
            maximal_sweeps=int(m.get("sweeps", 1)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> Instance:
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_instance(config: ExperimentConfig, instance_id: int) -> Instance:
    """Deterministic in ``(config.seed, instance_id)`` alone."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, instance_id]))
    spec = config.weights[instance_id // config.repeats]
    N, d = config.depth, config.dim
    weight = gen_weight(spec, N, d, seed=int(rng.integers(2**63)))
    return Instance(
        instance_id=instance_id,
        spec=spec,
        weight=weight,
        f=random_function(N, d, rng),
        carleson=random_carleson(N, d, rng, config.density),
        family=generate_sparse(N, config.sparse_strategy, seed=int(rng.integers(2**63))),
        S=random_matrix_sequence(N, d, rng, config.density),
        T=random_matrix_sequence(N, d, rng, config.density),
        maximal_seed=int(rng.integers(2**63)),
        maximal_trials=config.maximal_trials,
        maximal_sweeps=config.maximal_sweeps,
    )


def _gate(name: str, value: float, bound: float, lower: bool = False, detail: str = "") -> None:
    bad = value < bound if lower else value > bound
    if bad or math.isnan(value):
        raise InvariantViolation(name, value, bound, detail)


def evaluate_instance(inst: Instance) -> dict:
    """Compute one report row; raises :class:`InvariantViolation` if a provable
    inequality fails on this instance.
    """
    W, A = inst.weight, inst.carleson
    a2 = a2_characteristic(W)
    slack = _roundoff(W)
    _gate("a2_at_least_one", a2, 1.0 - TOL["a2"] - slack, lower=True)

    contraction_max = max(float(v.max()) for v in contraction_profile(W))
    _gate("contraction", contraction_max, 1.0 + TOL["contraction"] + slack)

    c2n = testing_constant_norm(W, A)
    c2m = testing_constant_matrix(W, A)
    c1 = embedding_constant(W, A)
    _gate("c2_matrix_le_c1", c2m, c1 + TOL["c2_matrix_le_c1"] * max(1.0, c1))

    scalar = None
    if W.dim == 1:
        scalar = scalar_cet_ratio(W, A)
        _gate("scalar_ratio_upper", scalar, 4.0 + TOL["scalar_ratio"])
        _gate("scalar_ratio_lower", scalar, 1.0 - TOL["scalar_ratio"], lower=True)

    dom = check_domination(W, inst.f)
    _gate("maximal_domination", dom, TOL["domination"])

    dec = stopping_time(W, inst.f)
    for k, members in dec.levels.items():
        for i, I in enumerate(members):
            for J in members[i + 1 :]:
                if I.contains(J) or J.contains(I):
                    raise InvariantViolation("stopping_disjoint", 1.0, 0.0, f"band {k}: {I} vs {J}")
    for k, vals in enumerate(dec.values):
        for p in np.flatnonzero(vals > 0):
            if DyadicIndex(k, int(p)) not in dec.star:
                raise InvariantViolation("stopping_total", 1.0, 0.0, f"{k}:{p} unassigned")
    g_dom = check_g_domination(W, inst.f)
    _gate("g_domination", g_dom, 4.0 + TOL["g_domination"])

    sest = check_sest(inst.S)
    _gate("sest", sest, 1.0 + TOL["sest"])
    dual = duality_ratio(inst.S, inst.T)

    packing = packing_constant(inst.family)
    _gate("packing", packing, 2.0 + TOL["packing"])
    chain = proof_chain_diagnostic(inst.family, W)
    _gate("proof_chain_testing_f", chain.testing_f, 2.0 + TOL["proof_chain"])
    _gate("proof_chain_testing_g", chain.testing_g, 2.0 + TOL["proof_chain"])
    _gate(
        "proof_chain_end_to_end",
        chain.end_to_end_bound,
        chain.sparse_norm - TOL["proof_chain"] * max(1.0, chain.sparse_norm),
        lower=True,
    )

    mlb = maximal_norm_lower_bound(
        "mw", W, inst.maximal_trials, inst.maximal_seed, sweeps=inst.maximal_sweeps
    )
    method = "exact" if W.n_cells * W.dim <= DENSE_LIMIT else "estimated"
    return {
        "instance_id": inst.instance_id,
        "family": inst.spec.family,
        "alpha": inst.spec.alpha,
        "theta": inst.spec.theta,
        "sigma": inst.spec.sigma,
        "depth": W.depth,
        "dim": W.dim,
        "a2": a2,
        "c2_norm": c2n,
        "c2_matrix": c2m,
        "c1_exact": c1,
        "c1_over_c2_norm": c1 / c2n if c2n > 0 else None,
        "scalar_ratio": scalar,
        "maximal_lower_bound": mlb,
        "maximal_over_a2": mlb / a2,
        "sparse_norm": chain.sparse_norm,
        "sparse_norm_method": method,
        "packing": packing,
        "bound_ratio": chain.sparse_norm / a2**1.5,
        "duality_ratio": dual,
        "testing_f": chain.testing_f,
        "testing_g": chain.testing_g,
        "end_to_end_bound": chain.end_to_end_bound,
        "domination_max": dom,
        "contraction_max": contraction_max,
        "g_domination_max": g_dom,
        "sest_max": sest,
    }


def _run_one(args) -> dict:
    config, instance_id = args
    inst = build_instance(config, instance_id)
    start = time.perf_counter()
    try:
        row = evaluate_instance(inst)
    except InvariantViolation as exc:
        exc.instance = inst
        raise
    if config.timing:
        row["wall_time"] = time.perf_counter() - start
    return row


def loglog_slope(x, y) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; ``None`` without spread."""
    pts = [(a, b) for a, b in zip(x, y) if a is not None and b is not None and a > 0 and b > 0]
    if len(pts) < 2:
        return None
    lx = np.log([a for a, _ in pts])
    ly = np.log([b for _, b in pts])
    if np.ptp(lx) < 1e-12:
        return None
    return float(np.polyfit(lx, ly, 1)[0])


def summarize(rows: list[dict]) -> dict:
    def col(name):
        return [r.get(name) for r in rows]

    def cmax(name):
        vals = [v for v in col(name) if v is not None]
        return max(vals) if vals else None

    a2 = col("a2")
    c1_loss = [
        r["c1_exact"] / (r["a2"] ** 2 * r["c2_norm"]) if r["c2_norm"] else None for r in rows
    ]
    return {
        "schema": SCHEMA_VERSION,
        "instances": len(rows),
        "max": {
            "maximal_over_a2": cmax("maximal_over_a2"),
            "c1_over_c2_norm": cmax("c1_over_c2_norm"),
            "c1_over_a2sq_c2_norm": max((v for v in c1_loss if v is not None), default=None),
            "bound_ratio": cmax("bound_ratio"),
            "duality_ratio": cmax("duality_ratio"),
            "scalar_ratio": cmax("scalar_ratio"),
        },
        "loglog_slope_vs_a2": {
            "maximal_lower_bound": loglog_slope(a2, col("maximal_lower_bound")),
            "c1_over_c2_norm": loglog_slope(a2, col("c1_over_c2_norm")),
            "sparse_norm": loglog_slope(a2, col("sparse_norm")),
        },
    }


class SweepAborted(Exception):
    def __init__(self, violation: InvariantViolation, quarantine: Path | None):
        self.violation = violation
        self.quarantine = quarantine
        super().__init__(f"{violation} (instance quarantined to {quarantine})")


def run_sweep(config: ExperimentConfig, quarantine_dir=None) -> list[dict]:
    """Evaluate every instance of ``config`` in instance-id order.

    On an invariant violation the failing instance is written to
    ``quarantine_dir`` (default: next to ``config.out``, else the working
    directory) and :class:`SweepAborted` is raised.
    """
    tasks = [(config, i) for i in range(config.n_instances)]
    try:
        if config.jobs > 1:
            with ProcessPoolExecutor(config.jobs) as pool:
                rows = list(pool.map(_run_one, tasks))
        else:
            rows = [_run_one(t) for t in tasks]
    except InvariantViolation as exc:
        inst = getattr(exc, "instance", None)
        path = None
        if inst is not None:
            base = Path(quarantine_dir or (Path(config.out).parent if config.out else "."))
            base.mkdir(parents=True, exist_ok=True)
            path = base / f"quarantine_{inst.instance_id}.json"
            payload = inst.to_dict()
            payload["violation"] = {"name": exc.name, "value": exc.value, "bound": exc.bound}
            path.write_text(json.dumps(payload))
        log.error("invariant violation: %s", exc)
        raise SweepAborted(exc, path) from exc
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[dict], columns: list[str] | None = None, schema: bool = True) -> str:
    columns = columns or (COLUMNS + (["wall_time"] if rows and "wall_time" in rows[0] else []))
    buf = io.StringIO()
    if schema:
        buf.write(f"# dyadlab report schema={SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_report(rows: list[dict], config: ExperimentConfig, out=None, fmt=None) -> str:
    """Serialize ``rows`` (plus config and summary for JSON); write to ``out`` if given."""
    fmt = fmt or config.format
    summary = summarize(rows)
    if fmt == "csv":
        text = rows_to_csv(rows)
    else:
        text = json.dumps(
            {"schema": SCHEMA_VERSION, "config": config.to_dict(), "rows": rows, "summary": summary},
            indent=1,
        ) + "\n"
    if out:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        if fmt == "csv":
            side = out.with_suffix(out.suffix + ".summary.json")
            side.write_text(
                json.dumps({"config": config.to_dict(), "summary": summary}, indent=1) + "\n"
            )
    return text
