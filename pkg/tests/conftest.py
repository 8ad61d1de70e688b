import os

import pytest

# Lines recorded by test_acceptance.verdict(), echoed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one acceptance criterion")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ROBINKIT_FULL") == "1":
        return
    skip = pytest.mark.skip(reason="full 2e10-prime run; set ROBINKIT_FULL=1")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
