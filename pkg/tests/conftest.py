"""Shared fixtures and the acceptance-criteria result summary."""

import re

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


_CRITERION = re.compile(r"test_criterion_(\w+)")
_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = _CRITERION.search(report.nodeid)
    if match is None:
        return
    if hasattr(report, "wasxfail"):
        status = "EXPECTED FAIL" if report.skipped else "UNEXPECTED PASS"
    elif report.passed:
        status = "PASS"
    else:
        status = "FAIL"
    elapsed = dict(report.user_properties).get("elapsed_s")
    _RESULTS[match.group(1)] = (status, elapsed)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_RESULTS):
        status, elapsed = _RESULTS[label]
        timing = "" if elapsed is None else f" ({elapsed:.2f}s)"
        terminalreporter.write_line(f"criterion {label}: {status}{timing}")
