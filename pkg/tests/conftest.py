import numpy as np
import pytest

from parqo import kernels
from parqo.streams import complex_normal, make_rng


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture(params=kernels.available())
def backend(request):
    """Run a test once per importable kernel backend."""
    active = kernels.BACKEND
    kernels.use(request.param)
    yield request.param
    kernels.use(active)


def fd_grad(f, x, h=1e-6):
    """Conjugate-coordinate gradient by central differences: (df/dRe + i df/dIm) / 2."""
    x = np.asarray(x, dtype=np.complex128)
    g = np.empty_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        dre = (f(x + e) - f(x - e)) / (2 * h)
        dim = (f(x + 1j * e) - f(x - 1j * e)) / (2 * h)
        g[i] = 0.5 * (dre + 1j * dim)
    return g


def random_system(rng, m, n):
    return complex_normal(rng, (m, n)), complex_normal(rng, (m,))


ACCEPTANCE_LINES = {}


def record_criterion(number, name, ok, detail):
    line = f"criterion {number:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
