from __future__ import annotations

import pytest
from hypothesis import settings

from mimo_noma.system import SystemConfig

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []

# Pmax in dBm used for each shape in the simulation scenarios
SCENARIO_PMAX = {(3, 3, 5): 20.0, (2, 2, 4): 20.0, (3, 3, 3): 10.0, (1, 4, 4): 10.0, (4, 2, 3): 10.0}


def scenario(M1: int, M2: int, N: int, pmax_dbm: float | None = None, d1_m: float = 100.0,
             d2_m: float = 10.0) -> SystemConfig:
    """Scenario with 100 m / 10 m users and -35 dBm noise; shapes given as (M1, M2, N)."""
    p = SCENARIO_PMAX.get((M1, M2, N), 20.0) if pmax_dbm is None else pmax_dbm
    return SystemConfig.from_distances(N, M1, M2, d1_m=d1_m, d2_m=d2_m, sigma2_dbm=-35.0, pmax_dbm=p)


@pytest.fixture
def record_criterion():
    """Print and remember one acceptance line; the summary is repeated at the end of the run."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
