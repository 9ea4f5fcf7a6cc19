import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zika_control import ModelParams, ObjectiveWeights, StateVector, TimeGrid  # noqa: E402
from zika_control.scenarios import MODES, ScenarioSpec, run_scenario  # noqa: E402


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def weights():
    return ObjectiveWeights()


@pytest.fixture(scope="session")
def x0():
    return StateVector.default_initial()


@pytest.fixture(scope="session")
def default_grid():
    return TimeGrid()


@pytest.fixture(scope="session")
def default_results():
    """The four default-configuration scenarios, solved once per session."""
    return {mode: run_scenario(ScenarioSpec(label=mode, mode=mode)) for mode in MODES}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
