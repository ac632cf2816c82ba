import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cspectra import kernels
from cspectra.grid import build_grid

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

IMPLS = [pytest.param(kernels.python_impl, id="python")]
if kernels.cython_impl is not None:
    IMPLS.append(pytest.param(kernels.cython_impl, id="cython"))


@pytest.fixture(params=IMPLS)
def impl(request):
    """Each kernel backend in turn."""
    return request.param


@pytest.fixture(scope="session")
def s2():
    return build_grid(3, 48)


@pytest.fixture(scope="session")
def s2_small():
    return build_grid(3, 24)


@pytest.fixture(scope="session")
def s1():
    return build_grid(2, 48)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
