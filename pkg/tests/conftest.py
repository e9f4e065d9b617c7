"""Collects one PASS/FAIL line per acceptance criterion and prints them at the end."""
import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
