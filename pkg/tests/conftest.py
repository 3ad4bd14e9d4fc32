import numpy as np
import pytest

from beltrami.examples import ExampleParams, ex1_Q0, example1_oracle
from beltrami.grid import GridSpec
from beltrami.solver import run_ladder

LADDER_LEVELS = [2, 4, 8, 16, 32]
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid512():
    return GridSpec(512, 1.25)


@pytest.fixture(scope="session")
def ex1_params():
    return ExampleParams(alpha=1.0, p=1.0, k=4.0)


@pytest.fixture(scope="session")
def ladder512(grid512, ex1_params):
    """Example-1 truncation ladder on the default grid (several minutes)."""
    P = ex1_params
    return run_ladder(example1_oracle(P), lambda z: ex1_Q0(z, P), LADDER_LEVELS, grid512, tol=1e-8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def constant_solves(grid512):
    """Cold solves for mu = 0.5 and nu = 0.5 with their wall times."""
    import time

    from beltrami.solver import constant_oracle, freeze, solve_linear

    out = {}
    for key, orc in (("mu", constant_oracle(mu0=0.5)), ("nu", constant_oracle(nu0=0.5))):
        t = time.perf_counter()
        sol = solve_linear(freeze(orc, grid512), grid512, tol=1e-8)
        out[key] = (sol, time.perf_counter() - t)
    return out


@pytest.fixture(scope="session")
def example1_solves(grid512, ex1_params):
    """Cold quasilinear solves of the truncated Example 1 for k in {2, 4, 8}."""
    import time

    from beltrami.solver import solve_quasilinear, truncate

    P = ex1_params
    out = {}
    for k in (2, 4, 8):
        t = time.perf_counter()
        orc = truncate(example1_oracle(P), lambda z: ex1_Q0(z, P), k)
        sol = solve_quasilinear(orc, grid512, tol=1e-8)
        out[k] = (sol, time.perf_counter() - t)
    return out
