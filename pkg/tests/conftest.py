"""Shared fixtures: the acceptance-criterion scoreboard."""
import pytest

_SCOREBOARD = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the end-of-session acceptance report."""

    def record(number, passed, detail):
        _SCOREBOARD[number] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _SCOREBOARD:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_SCOREBOARD):
        passed, detail = _SCOREBOARD[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
