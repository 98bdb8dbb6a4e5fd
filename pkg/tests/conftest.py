import numpy as np
import pytest

from lanekit import TopViewGrid

ACCEPTANCE: dict = {}


def record(num, name, ok, detail=""):
    """Remember one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE[num] = (name, bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {name}  {detail}")


@pytest.fixture
def grid():
    return TopViewGrid()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
