import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from churnkit import _kernels
from churnkit.data import convert_types, make_synthetic_telco, select_features, train_test_split, SplitSpec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

BACKENDS = sorted(_kernels.BACKENDS)

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    number, text = marker
    prev = _criteria.get(number, (text, "PASS"))[1]
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        if report.failed:
            outcome = "FAIL"
        elif report.skipped:
            outcome = "SKIPPED" if prev == "PASS" else prev
        else:
            outcome = prev
        _criteria[number] = (text, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {outcome:<7} {text}")


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def synth_table():
    return convert_types(make_synthetic_telco(600, seed=3))


@pytest.fixture(scope="session")
def synth_split(synth_table):
    X, y = select_features(synth_table)
    return train_test_split(X, y, SplitSpec(0.7, 1))

