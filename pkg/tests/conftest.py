import numpy as np
import pytest

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by a test")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and (report.when == "call" or report.failed):
        entry = item.config.stash[_VERDICTS].setdefault(mark.args[0], {"ok": True, "notes": []})
        entry["ok"] &= report.passed
    return report


@pytest.fixture
def verdict(request):
    """Attach a short measured summary to the current test's criterion line."""
    n = request.node.get_closest_marker("criterion").args[0]
    entry = request.config.stash[_VERDICTS].setdefault(n, {"ok": True, "notes": []})
    return entry["notes"].append


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash[_VERDICTS]
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        entry = verdicts[n]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  " + "; ".join(entry["notes"]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
