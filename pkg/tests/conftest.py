import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from qslkit.ensembles import SampleStream, bures_state, random_hamiltonian

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=6)


def rng_for(seed, stream=0):
    return SampleStream(seed, stream).generator()


def random_state(d, rng):
    return bures_state(d, rng)


def random_h(d, rng):
    return random_hamiltonian(d, rng)


@pytest.fixture
def rng():
    return SampleStream(12345, 0).generator()


# filled by the acceptance tests, echoed after the run
ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria checks")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
