import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

# (criterion number, description) -> (passed, seconds); filled by test_acceptance
ACCEPTANCE: dict = {}


@pytest.fixture
def data_dir():
    return DATA


def load_json(name):
    return json.loads((DATA / name).read_text())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), (ok, secs) in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} ({secs:.2f} s)")
