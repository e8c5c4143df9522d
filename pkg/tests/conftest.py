"""Per-criterion pass/fail summary for the acceptance suite.

Tests marked ``@pytest.mark.criterion(n, "title")`` are grouped by ``n``; a
criterion passes when all of its tests pass.  Details recorded through the
``measured`` fixture are printed next to the verdict.
"""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def measured(request):
    """Append a human-readable measurement to this test's summary line."""
    def note(text):
        request.node.user_properties.append(("measured", text))
    return note


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        number, title = mark.args
        entry = _RESULTS.setdefault(number, {"title": title, "outcomes": [], "notes": []})
        if call.excinfo is None:
            outcome = "passed"
        elif call.excinfo.errisinstance(pytest.skip.Exception):
            outcome = "skipped"
        else:
            outcome = "failed"
        entry["outcomes"].append(outcome)


def pytest_runtest_teardown(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None and mark.args[0] in _RESULTS:
        _RESULTS[mark.args[0]]["notes"] += [v for k, v in item.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        outs = entry["outcomes"]
        if "failed" in outs:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outs):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        notes = "; ".join(entry["notes"])
        tr.write_line(f"[{verdict}] criterion {number}: {entry['title']}" + (f" ({notes})" if notes else ""))
