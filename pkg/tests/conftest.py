"""Per-criterion pass/fail summary for tests marked ``acceptance``."""
from collections import OrderedDict

import pytest

_results = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    key, title = marker.args
    entry = _results.setdefault(key, {"title": title, "outcomes": [], "notes": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        state = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        entry["outcomes"].append(state)
        if report.skipped:
            entry["notes"].append(str(report.longrepr[-1]).removeprefix("Skipped: "))
        elif report.failed:
            msg = getattr(report.longrepr, "reprcrash", None)
            entry["notes"].append(msg.message.splitlines()[0] if msg else "failed")


def _verdict(states):
    if "FAIL" in states:
        return "FAIL"
    if all(s == "SKIP" for s in states):
        return "SKIP"
    if "SKIP" in states:
        return "PARTIAL"
    return "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, entry in _results.items():
        states = entry["outcomes"]
        counts = ", ".join(f"{states.count(s)} {s.lower()}" for s in ("PASS", "FAIL", "SKIP")
                           if s in states)
        tr.write_line(f"AC{key} {_verdict(states):7s} {entry['title']} ({counts})")
        for note in entry["notes"]:
            tr.write_line(f"      {note}")
