import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlsdecay import acceptance as acc

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cubic_pots():
    """Cubic-soliton potentials at mu = 1, L = 20, keyed by N (shared with the acceptance suite)."""
    return lambda N: acc.potentials(1.0, N)


@pytest.fixture(scope="session")
def cubic_H():
    return lambda N: acc.operator(1.0, N)


@pytest.fixture(scope="session")
def quintic_free_H():
    # sigma = 3 operator; the name avoids implying anything about integrability
    return lambda N: acc.operator(3.0, N)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
