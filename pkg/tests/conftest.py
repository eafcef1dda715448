"""Shared test helpers and the acceptance-summary hook."""
import numpy as np
import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion_line():
    """Collector for the one-line verdicts of the acceptance tests."""

    def record(line: str):
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
