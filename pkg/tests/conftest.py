import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record a one-line acceptance outcome; ``passed=None`` marks a skip."""

    def record(n: int, passed, detail: str) -> None:
        word = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        _CRITERIA[n] = f"criterion {n:2d}: {word}  {detail}"
        print(_CRITERIA[n])

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
