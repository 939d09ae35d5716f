import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

CRITERIA = {
    1: "estimator calibration",
    2: "odd-b divergent case end to end",
    3: "critical degree, geometric orbit",
    4: "balanced case above the critical degree, tuned a_3",
    5: "symmetry suite",
    6: "invariance identity",
    7: "leading terms of the branch curves",
    8: "singularity catalog",
    9: "dimension vs integral trichotomy",
    10: "determinism",
}
_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


@pytest.fixture
def note(request):
    """Attach a one-line detail to the criterion report."""
    def _note(text):
        request.node.user_properties.append(("detail", str(text)))
    return _note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    k = mark.args[0]
    details = [v for key, v in item.user_properties if key == "detail"]
    if rep.failed:
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else "failed"
        details.append(msg.splitlines()[0][:300])
    ok, prev = rep.passed, _results.get(k, (True, []))
    _results[k] = (prev[0] and ok, prev[1] + details)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k, title in CRITERIA.items():
        if k not in _results:
            terminalreporter.write_line(f"CRITERION {k}: NOT RUN ({title})")
            continue
        ok, details = _results[k]
        tail = "; ".join(details)
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} ({title}) {tail}".rstrip())
