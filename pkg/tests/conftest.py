import numpy as np
import pytest

from fdesingular import ProfileOptions, derive_exponents, solve_profile
from fdesingular.pde import annulus_grid
from fdesingular.selfsimilar import SelfSimilarSolution

# converged origin constant of the eta = 1 run for (3, 0.2, 2.75), see test_profile
A0_MAIN = 0.2706550659
HOELDER_OPTS = ProfileOptions(plateau_tol=2e-2)


@pytest.fixture(scope="session")
def e_main():
    return derive_exponents(3, 0.2, 2.75)


@pytest.fixture(scope="session")
def e_hoelder():
    return derive_exponents(3, 0.3, 2.9)


@pytest.fixture(scope="session")
def p_main(e_main):
    """eta = 1 profile, lambda = 1."""
    p = solve_profile(1.0, e_main)
    return p.rescaled(p.A0)


@pytest.fixture(scope="session")
def p_hoelder(e_hoelder):
    return solve_profile(1.0, e_hoelder, HOELDER_OPTS)


@pytest.fixture(scope="session")
def trapped_pair(p_main):
    """(lower, upper) self-similar solutions around A0: A1 = 0.9 A0, A2 = 1.3 A0."""
    lo = SelfSimilarSolution(p_main.rescaled(0.9 * p_main.A0))
    hi = SelfSimilarSolution(p_main.rescaled(1.3 * p_main.A0))
    return lo, hi


@pytest.fixture(scope="session")
def grid256():
    return annulus_grid(100.0, 256)


def bump(y, lo=1.0, hi=2.0):
    y = np.asarray(y, dtype=float)
    inside = (y > lo) & (y < hi)
    return np.where(inside, np.sin(np.pi * (y - lo) / (hi - lo)) ** 2, 0.0)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
