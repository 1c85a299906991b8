import numpy as np
import pytest

from padr import _accel
from padr.grid import GridParams
from padr.kernel import RadialKernel, normalize, truncate
from padr.operator import build
from padr.reaction import Reaction


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not importable")
    previous = _accel.backend()
    _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(previous)


@pytest.fixture
def g4():
    return GridParams(2, 1, 1)


@pytest.fixture
def table_op(g4):
    """Level table J(1) = 1, J(2) = 1/2 on the 4-point grid."""
    return build(g4, truncate(RadialKernel.table({0: 1.0, 1: 0.5}), g4))


@pytest.fixture
def ball_op(g4):
    """Normalized indicator of the ball of radius 2 on the 4-point grid."""
    return build(g4, truncate(normalize(RadialKernel.uniform_ball(1), 2, 1), g4))


@pytest.fixture
def rx():
    return Reaction.cubic(lam=6.0, alpha=0.75, delta=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def exp_operator(p, n, N, gamma=1.0):
    params = GridParams(p, n, N)
    return build(params, truncate(normalize(RadialKernel.exp_landscape(gamma), p, n), params))
