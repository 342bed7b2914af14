import numpy as np
import pytest

from edgesync import _accel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    prev = _accel.get_backend()
    _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)
