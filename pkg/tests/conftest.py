import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def report_criterion():
    """Record the one-line verdict for an acceptance criterion."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _ACCEPTANCE[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
