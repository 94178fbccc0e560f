# tests/conftest.py
# Shared fixtures and the hypothesis profile used by the suite.

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "satrep",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("satrep")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def effect_37():
    """The running unsharp example A = diag(0.3, 0.7)."""
    return np.diag([0.3, 0.7]).astype(complex)
