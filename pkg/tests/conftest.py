from __future__ import annotations

from pathlib import Path

import pytest

from cascadia.synth import generate, load_config
from cascadia.urlclass import BlacklistIndex, default_blacklist_dir, default_whitelist_file, load_whitelist

FIXTURES = Path(__file__).parent / "fixtures"

CRITERIA = {
    1: "IR oracle equivalence",
    2: "PIV correctness",
    3: "cascade telescoping",
    4: "bootstrap bound properties",
    5: "KS exactness",
    6: "learner correctness",
    7: "end-to-end increase/decrease experiment",
    8: "labeling exactness",
    9: "determinism and round-trip",
}
_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(crit, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n} [{name}]: {status}")


@pytest.fixture(scope="session")
def whitelist():
    return load_whitelist(default_whitelist_file())


@pytest.fixture(scope="session")
def index():
    return BlacklistIndex.load(default_blacklist_dir())


@pytest.fixture(scope="session")
def planted():
    """(threads, ground truth) for a small planted corpus."""
    return generate(load_config(FIXTURES / "planted.conf"))
