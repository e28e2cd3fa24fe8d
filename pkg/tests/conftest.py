import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion, then assert."""
    def check(number: int, title: str, ok: bool, detail: str, elapsed: float, budget: float):
        within = elapsed <= budget
        status = "PASS" if ok and within else "FAIL"
        line = (f"criterion {number:>2} {status}  {title}: {detail} "
                f"[{elapsed:.1f}s / budget {budget:.0f}s]")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
        assert within, f"{line} (over budget)"
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
