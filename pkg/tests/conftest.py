import pytest

_LINES: dict[int, str] = {}


class CriterionLog:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title

    def __call__(self, passed: bool, detail: str) -> bool:
        line = f"criterion {self.number:2d} {'PASS' if passed else 'FAIL'}  {self.title}: {detail}"
        _LINES[self.number] = line
        print(line)
        return passed


@pytest.fixture
def criterion(request):
    """``criterion(n, title)`` returns a logger whose line is repeated in the session summary."""
    return CriterionLog


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
