from pathlib import Path

import pytest

from steerlab import curvegen
from steerlab.geometry import Tunnel, sample_curve

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_TRIALSET = REPO_ROOT / "data" / "trialset"

# (angle_multipliers, periods) points known to land in every (L band, K) cell;
# a cheap stand-in for the full default grid in unit tests.
CURATED_GRID = [
    ((1,), 3.7), ((1, 2), 1.9), ((1, 2, 4), 1.0),
    ((2,), 2.9), ((1, 3), 2.0), ((1, 4), 1.5),
    ((5,), 1.6), ((3,), 2.6),
    ((2,), 1.3), ((1, 2, 4), 0.7),
    ((1, 2, 4), 1.1), ((3, 5), 0.9),
    ((1, 2), 2.9), ((3, 4), 1.6),
    ((2, 3, 5), 0.5), ((4, 5), 0.5),
    ((2,), 1.7), ((5,), 0.7),
    ((1, 4), 1.2), ((1, 2, 5), 1.0),
]


@pytest.fixture(scope="session")
def trialset9():
    """Nine assembled trial specs, one per (L, K) cell."""
    if DEFAULT_TRIALSET.is_dir():
        trials = curvegen.read_trialset(DEFAULT_TRIALSET)
        if len(trials) == 9:
            return trials
    candidates = curvegen.grid_search(param_grid=CURATED_GRID)
    return curvegen.assemble_trialset(candidates)


@pytest.fixture(scope="session")
def tunnels9(trialset9):
    return {t.trial_id: t.tunnel() for t in trialset9}


@pytest.fixture()
def straight_tunnel():
    """Horizontal 1300 px centerline, width 50."""
    curve = sample_curve(lambda t: t, lambda t: 0.0 * t, (0.0, 1300.0), 256)
    return Tunnel(curve, 50.0)


_ACCEPTANCE_LINES = []


def acceptance_report(name: str, ok: bool, detail: str = ""):
    """One pass/fail line per criterion, echoed in the terminal summary."""
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] {name}"
    if detail:
        line += f" ({detail})"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
