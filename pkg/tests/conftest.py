import numpy as np
import pytest

from nlslab.grid import RadialField, RadialGrid
from nlslab.groundstate import solve_ground_state

EXPONENTS = (7 / 3, 2.5, 3.0, 3.5, 4.0)

_GS = {}


def ground_state(p):
    if p not in _GS:
        _GS[p] = solve_ground_state(p)
    return _GS[p]


@pytest.fixture(scope="session")
def grid():
    return RadialGrid()


@pytest.fixture(scope="session")
def gs3():
    return ground_state(3.0)


@pytest.fixture(scope="session")
def gs_mc():
    return ground_state(7 / 3)


def corpus(grid):
    """Twenty smooth, decaying radial fields, none of them a GN optimizer."""
    r = grid.r
    shapes = [
        np.exp(-r ** 2),
        2.0 * np.exp(-r ** 2 / 4),
        0.5 * np.exp(-r ** 2 / 9),
        3.0 * np.exp(-2 * r ** 2),
        1 / np.cosh(r),
        2.0 / np.cosh(r) ** 2,
        np.exp(-np.sqrt(4 + r ** 2)),
        (1 + r) * np.exp(-r),
        (1 + r ** 2) ** -3,
        r ** 2 * np.exp(-r ** 2),
        r * np.exp(-r ** 2 / 2),
        np.exp(-(r - 3) ** 2),
        np.exp(-r ** 2) + 0.5 * np.exp(-(r - 4) ** 2),
        np.exp(-r ** 2 / 2) * np.cos(r),
        np.exp(-r ** 2 / 4) * (1 - r ** 2 / 4),
        np.exp(-r ** 2) * np.exp(0.5j * r ** 2),
        np.exp(-r ** 2 / 4) * np.exp(1j * r),
        (1 / np.cosh(r)) * np.exp(0.3j * r ** 2),
        np.exp(-r ** 4 / 16),
        np.exp(-np.sqrt(1 + r ** 2)),
    ]
    return [RadialField(grid, s) for s in shapes]


@pytest.fixture(scope="session")
def fields(grid):
    return corpus(grid)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
