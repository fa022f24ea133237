import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cascadelaser import SystemParams

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def bright_regime():
    """kappa=1, A=100, eta=0.1: the strongly squeezed operating point."""
    return SystemParams(kappa=1.0, gain_A=100.0, eta=0.1, epsilon=0.0)


@pytest.fixture
def weak_gain():
    """Low-excitation point used for the Fock-space comparisons."""
    return SystemParams(kappa=1.0, gain_A=0.4, eta=0.5, epsilon=0.0)
