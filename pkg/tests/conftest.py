import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("patchlab", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("patchlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# lines appended by test_acceptance.py, echoed after the run so they show without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
