"""Shared pytest hooks: acceptance-criterion result lines in the summary."""

import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, desc): marks a test as one numbered acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        _results[marker.kwargs["num"]] = (marker.kwargs["desc"], report.passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        desc, passed = _results[num]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {word} - {desc}")
