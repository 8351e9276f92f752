import numpy as np
import pytest

from mihd.directions import ALGEBRAIC, normalize
from mihd.spectral import Lattice


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def omega_alg():
    return normalize(ALGEBRAIC)


@pytest.fixture(scope="session")
def lat8():
    return Lattice(8)


@pytest.fixture(scope="session")
def lat16():
    return Lattice(16)


def grid_axes(n):
    return np.arange(n) / n


def direct_dft(samples, ks):
    """Naive O(n^3) DFT coefficient at each frequency in ``ks`` (independent oracle)."""
    n = samples.shape[0]
    y = grid_axes(n)
    Y1, Y2, Y3 = np.meshgrid(y, y, y, indexing="ij")
    out = []
    for k in ks:
        ph = np.exp(-2j * np.pi * (k[0] * Y1 + k[1] * Y2 + k[2] * Y3))
        out.append(np.sum(samples * ph) / n ** 3)
    return np.array(out)


def brute_grid(coeffs, kvec, points):
    """Evaluate a trigonometric polynomial at arbitrary points by explicit summation."""
    nz = np.nonzero(np.abs(coeffs) > 0)
    c = coeffs[nz]
    k = kvec[(slice(None),) + nz].astype(float)
    ph = np.exp(2j * np.pi * np.einsum("dk,pd->pk", k, points))
    return (ph @ c).real


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict, echoed in the terminal summary."""

    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
