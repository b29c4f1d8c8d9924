import time

import pytest

from cavmesh.cavity import CavityProblem, solve

WALL_LIMIT = 300.0
_START = time.perf_counter()
ACCEPTANCE = []


def record(criterion, ok, detail=""):
    """Log one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append((str(criterion), bool(ok), detail))
    return ok


@pytest.fixture(scope="session")
def solution():
    return solve(CavityProblem(), grid_size=2000)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    wall = time.perf_counter() - _START
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit, ok, detail in ACCEPTANCE:
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
    ok = wall < WALL_LIMIT
    tr.write_line(f"criterion 9 (suite wall time): {'PASS' if ok else 'FAIL'}  {wall:.1f} s < {WALL_LIMIT:.0f} s")


def pytest_sessionfinish(session, exitstatus):
    if ACCEPTANCE and time.perf_counter() - _START >= WALL_LIMIT and exitstatus == 0:
        session.exitstatus = 1
