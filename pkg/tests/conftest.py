import numpy as np
import pytest

from nclab.linalg import SeedSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def seed():
    return SeedSpec(7, 0)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
