"""Shared pytest setup: hypothesis profile and the acceptance summary."""
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

_LOG = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")
    config.stash[_LOG] = {}


@pytest.fixture
def report(request):
    """``report(ok, detail)`` records the verdict of the test's criterion."""
    log = request.config.stash[_LOG]
    n = request.node.get_closest_marker("criterion").args[0]

    def record(ok, detail):
        log[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" or not rep.failed:
        return
    log = item.config.stash[_LOG]
    n = mark.args[0]
    if n not in log or log[n][0]:
        exc = call.excinfo
        log[n] = (False, f"raised {exc.typename}: {str(exc.value).splitlines()[0] if str(exc.value) else ''}")


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_LOG, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(log):
        ok, detail = log[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
