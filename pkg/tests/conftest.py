import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(passed), detail)
    return record


def acceptance_lines() -> list[str]:
    return [f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
            for n, (ok, detail) in sorted(ACCEPTANCE.items())]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines():
        terminalreporter.write_line(line)
