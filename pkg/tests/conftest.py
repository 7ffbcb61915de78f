"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, passed, detail: str) -> str:
    status = "PASS" if passed is True else "FAIL" if passed is False else str(passed)
    line = f"criterion {number}: {status} | {detail}"
    ACCEPTANCE_LINES[number] = line
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
