import pytest

from nmbr9.rules import Instance
from nmbr9.shapes import default_catalog

ACCEPTANCE = []


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(number, title, passed, detail=""):
        ACCEPTANCE.append((number, title, passed, detail))
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {title}" + (f" -- {detail}" if detail else ""))


def make(variant, deck=None, s=8, l_top=3):
    return Instance.from_variant(variant, deck=deck, s=s, l_top=l_top)
