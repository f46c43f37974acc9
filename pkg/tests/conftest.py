"""Per-criterion pass/fail summary for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n)`` are grouped by ``n``; after the
run one line per acceptance criterion is printed.  A criterion passes only if
every test tagged with it ran and passed.
"""
import pytest

N_CRITERIA = 9
_outcomes: dict[int, list[str]] = {}
_criterion_of: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to acceptance criterion n")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = int(mark.args[0])


def pytest_runtest_logreport(report):
    n = _criterion_of.get(report.nodeid)
    if n is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        outcome = "passed" if report.passed else ("skipped" if report.skipped else "failed")
        _outcomes.setdefault(n, []).append(outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_of:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        res = _outcomes.get(n, [])
        if not res:
            status = "NOT RUN"
        elif all(r == "passed" for r in res):
            status = "PASS"
        else:
            status = "FAIL"
        detail = f"{res.count('passed')}/{len(res)} tests passed" if res else ""
        terminalreporter.write_line(f"criterion {n}: {status} {detail}".rstrip())
