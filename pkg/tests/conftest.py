import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lcsm.basis import build_basis  # noqa: E402
from oracles import random_symmetric  # noqa: E402


def make_instance(seed, d=4, s=2, q=3, n=10, penalize="default", noise=1.0):
    """Random basis with ``s`` Gaussian given matrices and ``q`` remainder ones, plus data."""
    rng = np.random.default_rng(seed)
    given = [random_symmetric(rng, d) for _ in range(s)]
    bs = build_basis(given=given, q=q, penalize=penalize)
    B = bs.matrices()
    theta = rng.normal(scale=2.0, size=bs.p) * (rng.random(bs.p) < 0.6)
    sigma = np.tensordot(theta, B, axes=1)
    Z = np.stack([sigma + noise * random_symmetric(rng, d) for _ in range(n)])
    return bs, B, Z


@pytest.fixture
def rng():
    return np.random.default_rng(20240311)


@pytest.fixture
def small_instance():
    return make_instance(7, d=4, s=2, q=3, n=10)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
