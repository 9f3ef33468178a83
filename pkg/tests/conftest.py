import numpy as np
import pytest

from gfa.synthesis.specs import LoadingSpec, NoiseSpec
from gfa.types import CovarianceSupplier


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def exchangeable():
    """sigma^2 = 2, rho = 1: Sigma_n = I + 1 1^T"""
    return CovarianceSupplier.exchangeable(2.0, 1.0, max_n=1000)


@pytest.fixture
def strong_pair():
    return [LoadingSpec(family="constant"), LoadingSpec(family="sign_pattern", param=2)]


@pytest.fixture
def weak_pair():
    return [LoadingSpec(family="constant"), LoadingSpec(family="saturating", param=0.5)]


@pytest.fixture
def ma1():
    return NoiseSpec(kind="moving_average", coeffs=(1.0, 0.5))
