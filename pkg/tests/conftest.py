import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def record():
    """Record one acceptance line; all lines are repeated in the terminal summary."""

    def _record(label: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
