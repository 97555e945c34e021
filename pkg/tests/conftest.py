import sys

import pytest
from hypothesis import HealthCheck, settings

from dfrelay.model import NetworkScenario

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit():
    """Unit noise so squared gains read directly as SNR per watt."""
    return NetworkScenario(relay_positions=((50.0, 0.0),), noise_power=1.0,
                           snr_target=10.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
