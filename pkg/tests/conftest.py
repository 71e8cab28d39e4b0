import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from snvec.states import ghz_state, psi432_state, sample_rng

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


@pytest.fixture(scope="session")
def ghz3():
    return ghz_state(3, 3)


@pytest.fixture(scope="session")
def psi_flat():
    return psi432_state([0.5, 0.5, 0.5, 0.5])


def seeded(seed):
    return sample_rng(seed, 0)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
