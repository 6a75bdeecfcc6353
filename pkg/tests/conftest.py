"""Per-criterion PASS/FAIL lines for tests marked ``criterion``."""

import pytest

_RESULTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        callspec = getattr(item, "callspec", None)
        if callspec is not None:
            title = f"{title} [{callspec.id}]"
        detail = dict(item.user_properties).get("detail", "")
        _RESULTS.append((number, title, report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_RESULTS, key=lambda r: r[0]):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
