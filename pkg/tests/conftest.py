import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from lcde.fixtures import fig1_system, fig2_graph, ring_graph, ring_system  # noqa: E402


@pytest.fixture
def fig1():
    return fig1_system()


@pytest.fixture
def fig2():
    return fig2_graph()


@pytest.fixture
def ring():
    return ring_system(), ring_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = ""
    if rep.failed:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    else:
        for name, text in rep.sections:
            if "stdout" in name:
                detail = text.strip().splitlines()[-1] if text.strip() else ""
    ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, verdict, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} [{verdict}] {title}" + (f" -- {detail}" if detail else ""))
