import pytest

from tracebox.fixtures import load_scenario

_ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        summary = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE_RESULTS[item.nodeid] = (report.outcome, summary)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, summary in _ACCEPTANCE_RESULTS.values():
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {summary}")


@pytest.fixture(scope="session")
def scenarios():
    return {sid: load_scenario(sid) for sid in (1, 2, 3)}
