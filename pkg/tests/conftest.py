import numpy as np
import pytest

from freefront.core import InitialData, ProblemSpec
from freefront.solver import SolverConfig, simulate


def every(dt, end):
    return tuple(dt * k for k in range(1, int(round(end / dt))))


@pytest.fixture(scope="session")
def unit_spec():
    return ProblemSpec(d1=1.0, d2=1.0, p=2.0, q=2.0, mu=1.0, rho=1.0, s0=1.0)


@pytest.fixture(scope="session")
def small_data_run(unit_spec):
    cfg = SolverConfig(t_end=20.0, snapshot_times=every(0.5, 20.0))
    return simulate(unit_spec, InitialData.family("parabola", 1.0 / 64), cfg)


@pytest.fixture(scope="session")
def long_small_data_run(unit_spec):
    cfg = SolverConfig(t_end=50.0, snapshot_times=every(1.0, 50.0))
    return simulate(unit_spec, InitialData.family("parabola", 1.0 / 64), cfg)


@pytest.fixture(scope="session")
def blowup_run(unit_spec):
    return simulate(unit_spec, InitialData.family("parabola", 50.0), SolverConfig(t_end=5.0))


@pytest.fixture(scope="session")
def linear_run():
    spec = ProblemSpec(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    cfg = SolverConfig(t_end=10.0, snapshot_times=every(1.0, 10.0))
    return simulate(spec, InitialData.family("parabola", 10.0), cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
