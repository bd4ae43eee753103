import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(id, ok, detail)``."""
    lines = request.config.stash[_LINES]

    def record(name, ok, detail):
        lines.append(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
        print(lines[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = list(config.stash[_LINES])
    for report in terminalreporter.stats.get("skipped", []):
        if "test_criterion_" in report.nodeid:
            name = report.nodeid.split("test_criterion_")[1].split("_")[0]
            lines.append(f"SKIP  criterion {name}: {report.longrepr[2]}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
