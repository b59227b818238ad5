import numpy as np
import pytest

from graphene_moments.grid import PhaseSpaceGrid, PositionGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_grid():
    return PhaseSpaceGrid(8, 16, 2 * np.pi, 8.0)


@pytest.fixture(scope="session")
def moment_grid():
    return PhaseSpaceGrid(16, 64, 2 * np.pi, 8.0)


@pytest.fixture(scope="session")
def pos32():
    return PositionGrid(32)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
