import pytest

from mindisc.oracle import moment_self_test


@pytest.fixture(scope="session", autouse=True)
def quadrature_self_test():
    # The oracles are only as good as their nodes; fail fast if these drift.
    moment_self_test()


CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        previous = CRITERIA.get(number, (title, "PASS"))[1]
        CRITERIA[number] = (title, "FAIL" if failed or previous == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, status = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}")
