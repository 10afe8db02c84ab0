import numpy as np
import pytest
from hypothesis import settings

from hlab.ifs import builtin

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["tent", "shift:2", "shift:3"])
def op_system(request):
    """Systems with equal weights on which the operator identities are exercised."""
    return builtin(request.param)
