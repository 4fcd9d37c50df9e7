import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twoflux.flux import PiecewiseAffineFlux, catalog_pair, sample_flux

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion lines collected by tests/test_acceptance.py, echoed in the summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def burgers():
    return catalog_pair("burgers_shifted", gap=1.0)


@pytest.fixture(scope="session")
def constant():
    return catalog_pair("constant_gap", gap=1.0)


@pytest.fixture(scope="session")
def burgers_tables(burgers):
    return sample_flux(burgers, 8, (-2.0, 2.0))


def table(values, nu=1, j_min=0):
    """Polygonal flux with the given node values on ``j_min * 2**-nu, ...``."""
    values = np.asarray(values, dtype=float)
    return PiecewiseAffineFlux(nu, j_min, j_min + values.size - 1, values)
