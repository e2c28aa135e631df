import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_psd(rng, d, rank=None, jitter=0.0):
    a = rng.standard_normal((d, rank or d))
    return a @ a.T + jitter * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
