import pytest

from fairlevel.corpus import load_corpus
from fairlevel.scenarios import scenario

# (criterion, passed, detail) filled in by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    def _record(name: str, passed: bool, detail: str = ""):
        ACCEPTANCE.append((name, bool(passed), detail))
        return passed
    return _record


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture
def two_point():
    return scenario("two-point-aware")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
