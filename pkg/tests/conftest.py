import pytest
from _support import ACCEPTANCE, run_fixture

from oecsim.scenario import load_fixture


@pytest.fixture(scope="session")
def fixture6h():
    """The bundled six-hour trace set."""
    return load_fixture()


@pytest.fixture(scope="session")
def default_run(fixture6h):
    """Full six-hour run: four functions, gate on, 60 % initial charge."""
    return run_fixture(fixture6h)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
