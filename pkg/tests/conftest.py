import os

import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ANTISYMRNN_RUN_OPTIONAL") == "1":
        return
    skip = pytest.mark.skip(reason="set ANTISYMRNN_RUN_OPTIONAL=1 to run")
    for item in items:
        if "optional" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for the acceptance summary, then assert."""
    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        request.config.stash[_KEY].append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_KEY]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
