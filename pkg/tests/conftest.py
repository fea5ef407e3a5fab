"""Shared pytest wiring: replay acceptance summary lines after capture ends."""

ACCEPT_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPT_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPT_LINES:
        terminalreporter.write_line(line)
