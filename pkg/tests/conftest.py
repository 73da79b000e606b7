import warnings

import pytest

warnings.filterwarnings("ignore", message="The TBB threading layer")

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    label, text = mark.args
    entry = _criteria.setdefault(label, {"text": text, "ok": True, "ran": False, "notes": []})
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry["ran"] = True
        entry["ok"] = entry["ok"] and rep.passed
        entry["notes"].extend(v for k, v in item.user_properties if k == "measured")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: (len(s), s)):
        e = _criteria[label]
        status = "PASS" if e["ok"] and e["ran"] else ("FAIL" if e["ran"] else "NOT RUN")
        notes = "; ".join(e["notes"])
        tr.write_line(f"[{status}] {label}: {e['text']}" + (f" | {notes}" if notes else ""))
