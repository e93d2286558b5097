from pathlib import Path

import pytest

from reckon.modelio import load_fixture, read_model

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"


@pytest.fixture
def car():
    return load_fixture("car")


@pytest.fixture
def listing1():
    return load_fixture("listing1")


def local_fixture(name, check=False):
    return read_model(FIXTURES / f"{name}.reckon.json", check=check)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
