import numpy as np
import pytest

from avgtr.grid import Grid2D

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def g51():
    return Grid2D.square(51)


@pytest.fixture(scope="session")
def g101():
    return Grid2D.square(101)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
