import pytest
from hypothesis import settings

from pulsed_entanglement.model import ProtocolParams, default_schedule

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def schedule():
    return default_schedule(16.3)


@pytest.fixture
def params():
    return ProtocolParams()


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
