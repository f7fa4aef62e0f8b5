"""Collects the acceptance PASS/FAIL lines and prints them after the run."""

import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def report(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
