import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from insarplan.constraints import DecisionState  # noqa: E402
from insarplan.geometry_coverage import AcrossTrackPosition, FormationState, master_position  # noqa: E402
from insarplan.scenario import ScenarioConfig, derive_constants  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def consts(cfg):
    return derive_constants(cfg)


@pytest.fixture
def reference_formation():
    return FormationState(AcrossTrackPosition(-80.0, 100.0), AcrossTrackPosition(-80.0, 90.0))


@pytest.fixture
def feasible_state(cfg):
    """A plan that satisfies every constraint under the default scenario."""
    q1 = master_position(69.12, cfg.x_t, cfg.theta_1)
    q2 = AcrossTrackPosition(-42.43, 53.48)
    n = cfg.n_slots
    return DecisionState(FormationState(q1, q2), np.full(n, 0.3), np.full(n, 6.0), np.full(n, 6.0))


@pytest.fixture(scope="session")
def table1_path():
    return ROOT / "scenarios" / "table1.conf"


def deg(x):
    return math.radians(x)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
