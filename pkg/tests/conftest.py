import numpy as np
import pytest

from fhn_homoclinic.core_model import Params


@pytest.fixture
def ref_params():
    """Reference point of the turn region."""
    return Params(p=0.05, s=1.37, eps=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20241014)
