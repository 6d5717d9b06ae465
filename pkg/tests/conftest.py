import numpy as np
import pytest

from hydrostat import spectral_core as sc
from hydrostat.spectral_core import Grid3
from hydrostat.state_model import Params


@pytest.fixture
def grid8():
    return Grid3(8, 8, 8, 1.0)


@pytest.fixture
def grid16():
    return Grid3(16, 16, 16, 1.0)


@pytest.fixture
def params():
    return Params()


def field(grid, fn, parity="none"):
    """Spectral field sampled from ``fn(X, Y, Z)``."""
    return sc.from_function(grid, fn, parity)


def random_physical(grid, seed=0):
    rng = np.random.default_rng(seed)
    return sc.PhysicalField3D(grid, rng.standard_normal(grid.shape))


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance PASS/FAIL lines collected by test_acceptance."""
    import sys

    module = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(results, key=lambda t: int(t[1:])):
        terminalreporter.write_line(results[tag])
