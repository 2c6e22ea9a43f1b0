import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from daca.model import BBox, Detection, Image  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, width, height):
    return Image(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def det(x0, y0, x1, y1, conf=0.9, cls=0):
    return Detection(BBox(x0, y0, x1, y1), cls, conf)


def random_box(rng, width, height, min_side=2.0):
    w = rng.uniform(min_side, width / 2)
    h = rng.uniform(min_side, height / 2)
    x0 = rng.uniform(0, width - w)
    y0 = rng.uniform(0, height - h)
    return BBox(x0, y0, x0 + w, y0 + h)


# acceptance criteria: tests tagged with @pytest.mark.criterion("name") are
# tallied per criterion and reported after the run

SUITE_BUDGET_S = 120.0
_criteria: dict[str, bool] = {}
_started = time.perf_counter()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion the test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (report.when == "call" or report.failed):
        return
    name = marker.args[0]
    _criteria[name] = _criteria.get(name, True) and report.passed


def _suite_elapsed():
    return time.perf_counter() - _started


def pytest_sessionfinish(session, exitstatus):
    if _criteria and _suite_elapsed() >= SUITE_BUDGET_S and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok in _criteria.items():
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
    elapsed = _suite_elapsed()
    verdict = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    tr.write_line(f"{verdict}  suite runtime: {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")
