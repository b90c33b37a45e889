import pytest

_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion this test decides")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    if report.failed:
        _RESULTS[cid] = ("FAIL", title)
    elif report.skipped:
        _RESULTS.setdefault(cid, ("SKIP", title))
    elif report.when == "call" and _RESULTS.get(cid, ("",))[0] != "FAIL":
        _RESULTS[cid] = ("PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        status, title = _RESULTS[cid]
        terminalreporter.write_line(f"{status}  criterion {cid:<3} {title}")
