import pytest

CRITERIA: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line: report(number, title, passed, detail)."""

    def _report(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        CRITERIA.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
