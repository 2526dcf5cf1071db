import pytest

# criterion number -> (passed, detail); filled by the acceptance module
CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: str, passed: bool, detail: str) -> None:
        CRITERIA[number] = (bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
