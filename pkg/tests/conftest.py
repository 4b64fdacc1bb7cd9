"""Shared pytest wiring: one printed pass/fail line per acceptance criterion.

Tests marked ``@pytest.mark.criterion(number, title)`` report their outcome
in a dedicated terminal section at the end of the run, so the acceptance
status is readable at a glance even inside a long ``pytest -v`` log.
"""

import pytest

_RESULTS = {}
_NOTES = {}


def _record_note(number: int, text: str):
    _NOTES[number] = text


@pytest.fixture
def acceptance_note():
    """Attach a short note (timings, margins) to this criterion's line."""
    return _record_note


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, title): acceptance criterion with a printed pass/fail line",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call":
        _RESULTS[number] = (title, report.passed)
    elif report.when == "setup" and report.failed:
        _RESULTS[number] = (title, False)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed = _RESULTS[number]
        status = "PASS" if passed else "FAIL"
        note = _NOTES.get(number)
        suffix = f" [{note}]" if note else ""
        terminalreporter.write_line(f"criterion {number}: {status} - {title}{suffix}")
