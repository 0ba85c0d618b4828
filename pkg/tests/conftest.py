import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    details = [v for k, v in item.user_properties if k == "detail"]
    previous = _criteria.get(number)
    if previous is None or previous[1] == "PASS":
        # a criterion spread over several tests passes only if every test does
        status = "PASS" if report.passed else "FAIL"
        merged = (previous[2] if previous else []) + details
        _criteria[number] = (title, status, merged)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, details = _criteria[number]
        extra = f"  [{'; '.join(dict.fromkeys(details))}]" if details else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {title}{extra}")
