import numpy as np
import pytest

from tabasco.simulator import SimulatorConfig, generate

# lines collected by the acceptance tests, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_sym():
    return generate(SimulatorConfig(max_class_size=600, noise_type="symmetric", seed=11))


@pytest.fixture(scope="session")
def small_asym():
    return generate(SimulatorConfig(max_class_size=600, noise_type="asymmetric", seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
