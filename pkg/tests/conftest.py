import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wrsf import load_veteran, simulate_proportional_hazards  # noqa: E402


@pytest.fixture(scope="session")
def veteran():
    return load_veteran()


@pytest.fixture
def small_ds():
    return simulate_proportional_hazards(n=40, m=4, seed=3)



# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    def record(name, ok, detail):
        ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
