import json
from pathlib import Path

import pytest

from ssiforge import parse_model

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

_acceptance: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def birth_path() -> Path:
    return FIXTURES / "birth_registration.json"


@pytest.fixture(scope="session")
def birth_model(birth_path):
    result = parse_model(birth_path.read_bytes())
    assert result.ok, result.errors
    return result.model


@pytest.fixture(scope="session")
def vectors() -> dict:
    return json.loads((Path(__file__).resolve().parent / "vectors.json").read_text(encoding="utf-8"))


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
