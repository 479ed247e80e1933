"""Command-line interface.

Exit codes: 0 success, 1 invariant violation, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .carleson import (
    CarlesonSequence,
    check_g_domination,
    embedding_constant,
    scalar_cet_ratio,
    stopping_time,
    testing_constant_matrix,
    testing_constant_norm,
)
from .errors import DyadlabError, InvariantViolation
from .experiments.generators import (
    FAMILIES,
    WeightSpec,
    gen_weight,
    random_carleson,
    random_function,
    random_matrix_sequence,
)
from .experiments.sweep import (
    ExperimentConfig,
    Instance,
    TOL,
    SweepAborted,
    build_instance,
    evaluate_instance,
    rows_to_csv,
    run_sweep,
    write_report,
)
from .maximal import maximal_aux, maximal_mw, maximal_norm_lower_bound
from .seqspaces import MatrixSequence, check_sest, duality_ratio, pairing, s_norm, t_norm
from .sparse import (
    SparseFamily,
    bound_ratio,
    generate_sparse,
    packing_constant,
    proof_chain_diagnostic,
    sparse_weighted_norm,
)
from .weights import GridVectorFn, MatrixWeight, a2_characteristic

log = logging.getLogger("dyadlab")


class BadInput(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int, default=4, help="tree depth N (2^N cells)")
    p.add_argument("--dim", type=int, default=2, help="matrix dimension d")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _weight_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weight", type=Path, help="weight JSON file")
    p.add_argument("--family", choices=FAMILIES, default="log-walk")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.5)


def _load_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise BadInput(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise BadInput(f"{path}: invalid JSON ({exc})") from exc


def _weight(args) -> MatrixWeight:
    if args.weight:
        return MatrixWeight.from_dict(_load_json(args.weight))
    if args.config:
        spec = WeightSpec.from_dict(_load_json(args.config))
    else:
        spec = WeightSpec(args.family, args.alpha, args.center, args.theta, args.sigma)
    return gen_weight(spec, args.depth, args.dim, args.seed)


def _function(args, W: MatrixWeight) -> GridVectorFn:
    if getattr(args, "function", None):
        return GridVectorFn.from_dict(_load_json(args.function))
    return random_function(W.depth, W.dim, np.random.default_rng(args.seed + 1))


def _emit(args, rows: list[dict], extra: dict | None = None) -> None:
    if args.format == "csv":
        columns = list(rows[0]) if rows else []
        text = rows_to_csv(rows, columns, schema=False)
    else:
        payload = {"rows": rows}
        if extra:
            payload.update(extra)
        text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_weight(args) -> int:
    W = _weight(args)
    text = json.dumps(W.to_dict())
    if args.out:
        args.out.write_text(text)
    else:
        print(text)
    return 0


def cmd_a2(args) -> int:
    W = _weight(args)
    _emit(args, [{"depth": W.depth, "dim": W.dim, "a2": a2_characteristic(W)}])
    return 0


def cmd_embed(args) -> int:
    W = _weight(args)
    if args.carleson:
        A = CarlesonSequence.from_dict(_load_json(args.carleson))
    else:
        A = random_carleson(W.depth, W.dim, np.random.default_rng(args.seed + 2), args.density)
    c2n = testing_constant_norm(W, A)
    c2m = testing_constant_matrix(W, A)
    c1 = embedding_constant(W, A)
    row = {
        "a2": a2_characteristic(W),
        "c2_norm": c2n,
        "c2_matrix": c2m,
        "c1_exact": c1,
        "c1_over_c2_norm": c1 / c2n if c2n else None,
        "c1_over_c2_matrix": c1 / c2m if c2m else None,
        "scalar_ratio": scalar_cet_ratio(W, A) if W.dim == 1 else None,
    }
    _emit(args, [row])
    if c2m > c1 + TOL["c2_matrix_le_c1"] * max(1.0, c1):
        raise InvariantViolation("c2_matrix_le_c1", c2m, c1)
    return 0


def cmd_maximal(args) -> int:
    W = _weight(args)
    f = _function(args, W)
    mw = maximal_mw(W, f)
    aux = maximal_aux(W.inverse, f)
    rows = [
        {"cell": f"{W.depth}:{j}", "mw": float(a), "aux_inverse": float(b), "excess": float(a - b)}
        for j, (a, b) in enumerate(zip(mw, aux))
    ]
    extra = {}
    if args.trials:
        extra = {
            "a2": a2_characteristic(W),
            "lower_bound_mw": maximal_norm_lower_bound("mw", W, args.trials, args.seed),
            "lower_bound_aux": maximal_norm_lower_bound("aux", W, args.trials, args.seed),
        }
        log.info("maximal lower bounds: %s", extra)
    _emit(args, rows, extra)
    if float(np.max(mw - aux)) > TOL["domination"]:
        raise InvariantViolation("maximal_domination", float(np.max(mw - aux)), 0.0)
    return 0


def cmd_stopping(args) -> int:
    W = _weight(args)
    f = _function(args, W)
    dec = stopping_time(W, f)
    rows = [
        {"band": k, "interval": str(I), "value": float(dec.values[I.level][I.position])}
        for k, members in dec.levels.items()
        for I in members
    ]
    ratio = check_g_domination(W, f)
    _emit(args, rows, {"g": dec.g.tolist(), "g_over_mw_max": ratio})
    if ratio > 4 + TOL["g_domination"]:
        raise InvariantViolation("g_domination", ratio, 4.0)
    return 0


def cmd_duality(args) -> int:
    rng = np.random.default_rng(args.seed + 3)
    if args.S:
        S = MatrixSequence.from_dict(_load_json(args.S))
    else:
        S = random_matrix_sequence(args.depth, args.dim, rng, args.density)
    if args.T:
        T = MatrixSequence.from_dict(_load_json(args.T))
    else:
        T = random_matrix_sequence(S.depth, S.dim, rng, args.density)
    sest = check_sest(S)
    row = {
        "pairing": pairing(S, T),
        "s_norm": s_norm(S),
        "t_norm": t_norm(T),
        "duality_ratio": duality_ratio(S, T),
        "sest_max": sest,
    }
    _emit(args, [row])
    if sest > 1 + TOL["sest"]:
        raise InvariantViolation("sest", sest, 1.0)
    return 0


def cmd_sparse_norm(args) -> int:
    W = _weight(args)
    if args.family_file:
        F = SparseFamily.from_dict(_load_json(args.family_file))
    else:
        F = generate_sparse(W.depth, args.strategy, args.seed)
    value, method = sparse_weighted_norm(F, W, with_method=True)
    chain = proof_chain_diagnostic(F, W)
    row = {
        "members": len(F),
        "a2": chain.a2,
        "sparse_norm": value,
        "method": method,
        "bound_ratio": bound_ratio(F, W),
        "packing": packing_constant(F),
        "testing_f": chain.testing_f,
        "testing_g": chain.testing_g,
        "end_to_end_bound": chain.end_to_end_bound,
    }
    _emit(args, [row])
    if max(chain.testing_f, chain.testing_g) > 2 + TOL["proof_chain"]:
        raise InvariantViolation("proof_chain_testing", max(chain.testing_f, chain.testing_g), 2.0)
    if chain.end_to_end_bound < value - TOL["proof_chain"] * max(1.0, value):
        raise InvariantViolation("proof_chain_end_to_end", chain.end_to_end_bound, value)
    return 0


def cmd_sweep(args) -> int:
    data = _load_json(args.config) if args.config else {}
    data.setdefault("depth", args.depth)
    data.setdefault("dim", args.dim)
    data.setdefault("seed", args.seed)
    if args.jobs:
        data["jobs"] = args.jobs
    if args.out:
        data["out"] = str(args.out)
    data["format"] = args.format if "format" not in data or args.format_given else data["format"]
    config = ExperimentConfig.from_dict(data)
    rows = run_sweep(config)
    text = write_report(rows, config, out=config.out)
    if not config.out:
        sys.stdout.write(text)
    return 0


def cmd_check(args) -> int:
    if args.instance:
        data = _load_json(args.instance)
        if "weight" in data:
            inst = Instance.from_dict(data)
        else:
            # a bare weight file: pair it with generated companions
            W = MatrixWeight.from_dict(data)
            config = ExperimentConfig(depth=W.depth, dim=W.dim, seed=args.seed)
            inst = build_instance(config, 0)
            inst.weight = W
    else:
        config = ExperimentConfig(depth=args.depth, dim=args.dim, seed=args.seed)
        inst = build_instance(config, 0)
    row = evaluate_instance(inst)
    _emit(args, [row])
    return 0


COMMANDS = {
    "gen-weight": cmd_gen_weight,
    "a2": cmd_a2,
    "embed": cmd_embed,
    "maximal": cmd_maximal,
    "stopping": cmd_stopping,
    "duality": cmd_duality,
    "sparse-norm": cmd_sparse_norm,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-weight", help="generate a weight and write it as JSON")
    _common(p)
    _weight_flags(p)

    p = sub.add_parser("a2", help="matrix A2 characteristic of a weight")
    _common(p)
    _weight_flags(p)

    p = sub.add_parser("embed", help="testing constants and exact embedding constant")
    _common(p)
    _weight_flags(p)
    p.add_argument("--carleson", type=Path, help="Carleson sequence JSON file")
    p.add_argument("--density", type=float, default=0.3)

    p = sub.add_parser("maximal", help="weighted maximal functions and norm lower bounds")
    _common(p)
    _weight_flags(p)
    p.add_argument("--function", type=Path, help="vector function JSON file")
    p.add_argument("--trials", type=int, default=0, help="random starts for the norm lower bound")

    p = sub.add_parser("stopping", help="stopping-time decomposition of M_W f")
    _common(p)
    _weight_flags(p)
    p.add_argument("--function", type=Path, help="vector function JSON file")

    p = sub.add_parser("duality", help="sequence-space norms and trace pairing")
    _common(p)
    p.add_argument("--S", type=Path, help="matrix sequence JSON (H1 side)")
    p.add_argument("--T", type=Path, help="matrix sequence JSON (BMO side)")
    p.add_argument("--density", type=float, default=0.3)

    p = sub.add_parser("sparse-norm", help="exact L2(W) norm of a sparse operator")
    _common(p)
    _weight_flags(p)
    p.add_argument("--family-file", type=Path, help="sparse family JSON file")
    p.add_argument("--strategy", choices=("chain", "random", "greedy-maximal"), default="random")

    p = sub.add_parser("sweep", help="run a corpus sweep and write the report")
    _common(p)
    p.add_argument("--jobs", type=int, default=0)

    p = sub.add_parser("check", help="run the full invariant suite on one instance")
    _common(p)
    p.add_argument("--instance", type=Path, help="instance or quarantine JSON file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.format_given = "--format" in argv
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (InvariantViolation, SweepAborted) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    except (BadInput, DyadlabError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
