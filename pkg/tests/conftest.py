import re
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

_CRITERION = re.compile(r"criterion_(\d+)")


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def taxonomy_path() -> Path:
    return DATA / "taxonomy_transport.jsonl"


@pytest.fixture
def doc_paths() -> list[Path]:
    docs = DATA / "docs"
    return [docs / "railco.txt", docs / "motorco.txt", docs / "shipco.txt", docs / "infraco.json"]


# --- acceptance-criteria reporting -----------------------------------------
# test_acceptance.py names its tests test_criterion_<n>_...; collect their
# outcomes and print one line per criterion at the end of the run.

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance_results[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_acceptance_results, key=_criterion_number):
        outcome = _acceptance_results[nodeid]
        name = nodeid.split("::")[-1]
        mark = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{mark}  {name}")


def _criterion_number(nodeid: str) -> int:
    m = _CRITERION.search(nodeid)
    return int(m.group(1)) if m else 999
