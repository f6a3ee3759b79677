import pytest

import acceptance_log


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(*nums): acceptance criteria a test decides")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and report.failed:
        for mark in item.iter_markers("criterion"):
            for num in mark.args:
                acceptance_log.record(num, False, f"{item.name} failed")


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(acceptance_log.RESULTS):
        passed, detail = acceptance_log.RESULTS[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
