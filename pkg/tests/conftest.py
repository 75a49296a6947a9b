"""Collects acceptance outcomes and prints one line per criterion."""
from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        details = [v for k, v in item.user_properties if k == "detail"]
        _RESULTS[marker.args].append((item.name, report.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for (number, title), entries in sorted(_RESULTS.items()):
        ok = all(passed for _, passed, _ in entries)
        tr.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}")
        for name, passed, details in entries:
            for d in details:
                tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {name}: {d}")
            if not details and not passed:
                tr.write_line(f"    FAIL {name}")


@pytest.fixture
def detail(record_property):
    """Attach a human-readable measurement line to the acceptance report."""
    return lambda text: record_property("detail", text)
