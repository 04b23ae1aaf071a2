from pathlib import Path

import pytest

from diqkd.io import load_correlation_table

DATA = Path(__file__).resolve().parents[1] / "src" / "diqkd" / "data"

# (number, description, passed, detail) filled in by test_acceptance
ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def table1():
    return load_correlation_table(DATA / "table1.csv")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: (r[0], r[1])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {desc}: {detail}")
