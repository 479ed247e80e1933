"""Regenerate the golden fixtures in this directory.

    python3 tests/fixtures/regen.py

The alpha sweep is computed with the brute-force oracles (explicit interval
loops, scipy sqrtm and a dense SVD of an independently assembled operator),
not with the library, so the frozen values are an external reference. The
corpus file records report maxima from a fixed sweep config and serves as a
regression baseline.
"""

import json
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as sla

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402
from dyadlab.experiments.generators import WeightSpec, gen_weight  # noqa: E402
from dyadlab.experiments.sweep import ExperimentConfig, run_sweep, summarize  # noqa: E402

ALPHAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
SWEEP = {"family": "rotated-pair", "theta": 0.3, "center": 0.0, "depth": 8, "dim": 2}

CORPUS_CONFIG = {
    "depth": 4,
    "dim": 2,
    "seed": 2024,
    "repeats": 4,
    "sparse_strategy": "random",
    "weights": [
        {"family": "identity"},
        {"family": "scalar-power", "alpha": -0.6},
        {"family": "rotated-pair", "alpha": 0.5, "theta": 0.4},
        {"family": "rotated-pair", "alpha": 0.8, "theta": 1.1, "center": 0.3},
        {"family": "log-walk", "sigma": 0.3},
        {"family": "log-walk", "sigma": 0.6},
        {"family": "random-spd", "sigma": 0.5},
        {"family": "random-spd", "sigma": 1.0},
    ],
}


def alpha_sweep():
    N, d = SWEEP["depth"], SWEEP["dim"]
    chain = [(k, 0) for k in range(N + 1)]
    rows = []
    for alpha in ALPHAS:
        spec = WeightSpec(SWEEP["family"], alpha=alpha, theta=SWEEP["theta"], center=SWEEP["center"])
        cells = np.array(gen_weight(spec, N, d).cells)
        a2 = oracles.a2(cells, N)
        T = oracles.sparse_matrix(chain, cells, N)
        norm = float(sla.svdvals(T)[0])
        rows.append({"alpha": alpha, "a2": a2, "sparse_norm": norm, "bound_ratio": norm / a2**1.5})
    return {"sweep": SWEEP, "sparse_family": "chain", "rows": rows}


def corpus():
    config = ExperimentConfig.from_dict(CORPUS_CONFIG)
    summary = summarize(run_sweep(config))
    return {"config": CORPUS_CONFIG, "summary": summary}


if __name__ == "__main__":
    (HERE / "alpha_sweep.json").write_text(json.dumps(alpha_sweep(), indent=1) + "\n")
    (HERE / "corpus.json").write_text(json.dumps(corpus(), indent=1) + "\n")
