from __future__ import annotations

import re

import pytest

_REPORT: dict[str, str] = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one status line per acceptance criterion for the summary."""
    return _REPORT


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_REPORT, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        terminalreporter.write_line(_REPORT[key])
