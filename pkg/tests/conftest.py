from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dseq import _kernels as K

settings.register_profile("dseq", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dseq")


@pytest.fixture(params=sorted(K.BACKENDS))
def backend(request):
    """Run the test once per available kernel backend."""
    with K.using(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------- acceptance summary

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    num, title = mark.args
    _CRITERIA[num] = ("PASS" if rep.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2}: {status}  {title}")
