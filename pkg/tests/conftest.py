import numpy as np
import pytest

from splatar import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the hot kernels once so no test pays JIT cost mid-assert."""
    _kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
