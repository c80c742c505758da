from functools import lru_cache

import numpy as np
import pytest

from randlin.driving import make_driving
from randlin.spectrum import system_spectrum
from randlin.system import load_system, make_system


@lru_cache(maxsize=None)
def catalog(name):
    system, driving = load_system(name)
    return system, driving, system_spectrum(system, driving)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def linear_2d():
    return make_system(np.diag([2.0, 0.5]), rho=1.0), make_driving()


ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Record one acceptance line and fail the test if the criterion fails."""
    def _record(number, title, ok, detail):
        line = f"criterion {number:2d}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert ok, line
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
