from __future__ import annotations

import pytest

_RESULTS: dict[int, tuple[str, str, float, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion id")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    detail = ""
    if rep.failed:
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") \
            else str(rep.longrepr)
        detail = msg.splitlines()[0][:160] if msg else ""
    _RESULTS[number] = ("PASS" if rep.passed else "FAIL", title, rep.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, secs, detail = _RESULTS[number]
        line = f"criterion {number:>2}: {status}  ({secs:6.1f} s)  {title}"
        tr.write_line(line)
        if detail:
            tr.write_line(f"               {detail}")
