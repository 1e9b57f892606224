import functools

import numpy as np
import pytest

from sphmean.geometry import H2, S2
from sphmean.io import default_r_max
from sphmean.phantoms import standard_phantoms
from sphmean.spectrum import assemble_basis
from sphmean.transform import forward_sinogram

BALL = {H2: 1.0, S2: 0.7}
GRID = {"n_theta": 128, "n_r": 512}

# acceptance lines: criterion -> [(ok, detail)]
_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def record(request):
    """record(criterion, ok, detail): one sub-check of an acceptance criterion."""
    store = request.config.stash[_ACCEPTANCE]

    def add(criterion, ok, detail):
        store.setdefault(criterion, []).append((bool(ok), detail))
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")

    return add


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash[_ACCEPTANCE]
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(store):
        parts = store[c]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(("" if ok else "[fail] ") + d for ok, d in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {status}  {detail}")


@pytest.fixture(scope="session")
def basis():
    """Spectral bases (m_max 8, k_max 6) on the two reference balls."""
    cache = {}

    def get(geometry):
        if geometry not in cache:
            cache[geometry] = assemble_basis(geometry, BALL[geometry], 8, 6)
        return cache[geometry]

    return get


@pytest.fixture(scope="session")
def sinogram():
    """Quadrature sinograms of the standard phantoms at the default grid."""

    @functools.lru_cache(maxsize=None)
    def get(geometry, name, n_r=GRID["n_r"], n_theta=GRID["n_theta"]):
        R = BALL[geometry]
        f = standard_phantoms(geometry, R)[name]
        return forward_sinogram(f, R, n_theta, n_r, default_r_max(geometry, R))

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
