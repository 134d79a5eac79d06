import numpy as np
import pytest

from sss import _kernels
from sss.grid import ImageGrid
from sss.sim import generate_noise


@pytest.fixture(params=["numba", "numpy"])
def each_backend(request):
    prev = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(prev)


@pytest.fixture(scope="session")
def noise280():
    return generate_noise(280, 280, 12345)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def ramp_phantom(rows=96, cols=96, slope=0.5, seed=5):
    i = np.arange(rows, dtype=float)[:, None] * np.ones((1, cols))
    return ImageGrid(slope * i + generate_noise(rows, cols, seed).values)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
