import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dmimo_isac.config import SignalModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def mmwave():
    """28 GHz / 6 MHz signal used throughout the positioning tests."""
    return SignalModel(carrier_hz=28e9, bandwidth_hz=6e6, ref_snr_db=50.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
