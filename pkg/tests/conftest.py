from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def crohn_path():
    return DATA_DIR / "crohnd.csv"


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(LINES):
            terminalreporter.write_line(line)
