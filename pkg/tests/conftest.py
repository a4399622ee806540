import pytest

_REPORT: list[str] = []


@pytest.fixture(scope="session")
def report():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _REPORT


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
