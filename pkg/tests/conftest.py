import copy

import numpy as np
import pytest
from hypothesis import settings

from maninkit.liegroup import catalog_model

settings.register_profile("maninkit", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("maninkit")

ACCEPTANCE_MODELS = ("double-so3", "sl2c-su2")


@pytest.fixture(scope="session")
def so3():
    return catalog_model("double-so3")


@pytest.fixture(scope="session")
def sl2c():
    return catalog_model("sl2c-su2")


@pytest.fixture(params=ACCEPTANCE_MODELS, scope="session")
def model(request):
    return catalog_model(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def with_omega(space, omega_fn):
    """Shallow copy of a space with its 2-form replaced (for negative controls)."""
    out = copy.copy(space)
    out.omega = omega_fn
    return out


def with_moment(space, moment_fn):
    out = copy.copy(space)
    out.moment = moment_fn
    return out


def bump(model, factor=0, scale=0.5):
    """A non-closed 2-form (1 + 3 x) theta^0 ^ theta^1 on one factor; x is a matrix entry."""
    from maninkit.geomcalc import mc_left

    def extra(P):
        j = P[factor]
        left = mc_left(model, j)
        f = 1.0 + 3.0 * j.v[0, 1]
        c = np.outer(left[:, 0], left[:, 1])
        return scale * f * (c - c.T)

    return extra


def corrupted(space, scale=0.5, factor=0):
    extra = bump(space.model, factor, scale)
    return with_omega(space, lambda P: space.omega(P) + extra(P))
