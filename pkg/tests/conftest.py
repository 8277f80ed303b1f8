import warnings

import numpy as np
import pytest
from hypothesis import settings, strategies as st
from hypothesis.extra.numpy import arrays

from fdswipt.system import SystemParams, compute_bounds, sample_channels

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60,
                          print_blob=True)
settings.load_profile("repo")

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def complex_arrays(shape, bound=10.0):
    """Complex arrays with bounded real and imaginary parts."""
    floats = st.floats(-bound, bound, allow_nan=False, allow_infinity=False)
    return arrays(float, (2,) + tuple(shape), elements=floats).map(lambda a: a[0] + 1j * a[1])


def instance(params, trial, seed=11):
    ch = sample_channels(params, trial, seed)
    return ch, compute_bounds(params, ch)


@pytest.fixture
def params4():
    return SystemParams(n_users=2, n_tx=4, n_rx=2)


@pytest.fixture(autouse=True)
def _quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        yield
