from collections import defaultdict

import pytest

CRITERIA = {
    1: "toy identity and finite-difference refinement",
    2: "space-form curvature exactness",
    3: "neck admissibility and margin",
    4: "Green solver exactness and rates",
    5: "dumbbell pipeline",
    6: "handle pipeline",
    7: "sharpness negative control",
    8: "blend asymptotics",
    9: "structural cross-checks",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[marker.args[0]].append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k, title in CRITERIA.items():
        results = _outcomes.get(k)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {status:7s} {title}")
