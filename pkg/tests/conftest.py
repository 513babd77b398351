import numpy as np
import pytest

from immunesom import datagen, signals


@pytest.fixture(scope="session")
def an_short():
    """A 300 s AN session and its frames, shared across modules."""
    session = datagen.generate_session(datagen.ScenarioConfig.an(rng_seed=3, duration=300))
    ft, fx = signals.frames_to_array(signals.normalize_session(session.samples()))
    return session, ft, fx


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
