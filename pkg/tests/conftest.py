import pytest

_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, echoed in the terminal summary."""

    def record(number: int, title: str, ok: bool, seconds: float, detail: str = "") -> bool:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'} {title} ({seconds:.1f}s){': ' + detail if detail else ''}"
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
