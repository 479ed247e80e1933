import numpy as np
import pytest

from dyadlab import MatrixWeight
from dyadlab.errors import NotSPDError
from dyadlab.experiments.generators import WeightSpec, gen_weight

_ACCEPTANCE: dict[int, tuple[str, str]] = {}

# Cell condition numbers above this are redrawn. Identities that hold exactly
# cellwise (contraction 1, [W]_A2 >= 1) are only computable to about
# eps * cond in float64, so the 1e-10 tolerances need cond well below 1e6.
COND_CAP = 1e5


def random_weight(rng: np.random.Generator, depth: int, dim: int) -> MatrixWeight:
    """A moderately conditioned weight from a family chosen at random."""
    while True:
        try:
            W = _draw_weight(rng, depth, dim)
        except NotSPDError:
            # a long log-walk can drift past the SPD tolerance
            continue
        if W.condition <= COND_CAP:
            return W


def _draw_weight(rng: np.random.Generator, depth: int, dim: int) -> MatrixWeight:
    family = rng.choice(["random-spd", "log-walk", "scalar-power", "rotated-pair"])
    if family == "rotated-pair" and dim < 2:
        family = "scalar-power"
    spec = WeightSpec(
        family=str(family),
        alpha=float(rng.uniform(-0.9, 0.9)),
        center=float(rng.uniform(0.0, 1.0)),
        theta=float(rng.uniform(0.0, np.pi)),
        sigma=float(rng.uniform(0.0, 1.2 if family == "random-spd" else 0.6)),
    )
    return gen_weight(spec, depth, dim, seed=int(rng.integers(2**32)))


def entries_of(seq) -> dict:
    """Plain ``{(level, position): matrix}`` view for the oracles."""
    return {(I.level, I.position): np.array(A) for I, A in seq.entries.items()}


def members_of(F) -> list:
    return [(I.level, I.position) for I in F.sorted()]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and (report.when == "call" or report.failed):
        n, title = marker.args
        _ACCEPTANCE[n] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{status}] criterion {n:2d}: {title}")
