"""Shared fixtures and reporting hooks for the test suite."""

import pytest

from flexstate.resp.server import MiniRespServer


@pytest.fixture
def mini_server():
    """A fresh RESP server on an ephemeral loopback port."""
    server = MiniRespServer()
    server.start()
    yield server
    server.stop()


_CRITERION_REPORTS = {}


def pytest_runtest_logreport(report):
    # Track acceptance-criterion outcomes for the terminal summary.
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        _CRITERION_REPORTS[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_REPORTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERION_REPORTS):
        outcome = _CRITERION_REPORTS[name]
        terminalreporter.write_line(f"{name}: {outcome}")
