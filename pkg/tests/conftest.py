import time

import pytest

_START = time.perf_counter()
SUITE_BUDGET = 300.0

_verdicts: dict[int, tuple[str, bool, list[str]]] = {}


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def note(text: str) -> None:
        request.node.user_properties.append(("detail", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, label = marker.args
    if report.when == "setup" and report.passed:
        return
    notes = [v for k, v in item.user_properties if k == "detail"]
    # parametrized checks share one line; any failure fails the criterion
    _, ok, earlier = _verdicts.get(number, (label, True, []))
    _verdicts[number] = (label, ok and report.passed, earlier + notes)


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _START
    if not _verdicts:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_verdicts):
        label, ok, notes = _verdicts[number]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {label}"
        tr.write_line(line + (f"  [{'; '.join(notes)}]" if notes else ""))
    ok = elapsed < SUITE_BUDGET
    tr.write_line(f"suite wall-clock {'PASS' if ok else 'FAIL'}  {elapsed:.1f} s (budget {SUITE_BUDGET:.0f} s)")
