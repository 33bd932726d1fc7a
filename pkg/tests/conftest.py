from __future__ import annotations

from .acceptance_support import LINES


def pytest_terminal_summary(terminalreporter):
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(LINES):
        terminalreporter.write_line(LINES[k])
