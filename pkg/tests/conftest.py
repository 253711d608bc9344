import numpy as np
import pytest

from covert_isac.model import default_config, default_scene, random_channel_set


@pytest.fixture(scope="session")
def desk_cfg():
    """Small configuration used by most solver tests."""
    return default_config(mt=16, mr=16, u_carols=2, n_rf=4, rng_seed=0)


@pytest.fixture(scope="session")
def desk_instance(desk_cfg):
    rng = np.random.default_rng(42)
    ch = random_channel_set(desk_cfg, rng)
    scene = default_scene(rng)
    return ch, scene


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
