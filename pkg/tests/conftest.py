"""Collects acceptance-gate outcomes and prints one line per criterion."""

import pytest

_outcomes: dict[int, dict] = {}


@pytest.fixture
def gate_note(request):
    """Attach measured values to the current criterion's report line."""
    marker = request.node.get_closest_marker("criterion")
    entry = _outcomes.setdefault(marker.args[0], {"title": marker.args[1], "notes": [], "passed": True})

    def note(text: str):
        entry["notes"].append(text)

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and report.passed:
        return
    entry = _outcomes.setdefault(marker.args[0], {"title": marker.args[1], "notes": [], "passed": True})
    if report.failed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        status = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(entry["notes"])
        terminalreporter.write_line(f"[{status}] criterion {number}: {entry['title']}" + (f" ({detail})" if detail else ""))
