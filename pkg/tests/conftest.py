import sys

import numpy as np
import pytest

from msfbraid.lattice import CouplingParams, LatticeGeometry


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_geom():
    return LatticeGeometry(8, 6)


@pytest.fixture
def unit_couplings():
    return CouplingParams(J=1.0, Delta=1.0)


def random_skew(rng, n):
    M = rng.normal(size=(n, n))
    return M - M.T
