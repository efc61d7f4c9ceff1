import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def ridge_scenario():
    from agplan.harness import bundled_scenario
    return bundled_scenario("ridge")


@pytest.fixture(scope="session")
def ridge_plans(ridge_scenario):
    from agplan.planner import plan
    grid = ridge_scenario.grid()
    cfg = ridge_scenario.config()
    return grid, cfg, plan(grid, ridge_scenario.start, ridge_scenario.goal, cfg, optimize=False), \
        plan(grid, ridge_scenario.start, ridge_scenario.goal, cfg, optimize=True)


ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, text: str):
    line = f"AC{number:<2} {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
