import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jholo.geometry import build_grid

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 64)


@pytest.fixture(scope="session")
def grid32():
    return build_grid(32, 128)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
