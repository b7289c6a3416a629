import numpy as np
import pytest

from angioforge.config import BackendConfig, SessionConfig
from angioforge.phantom import fontan_phantom
from angioforge.raster import encode_png
from angioforge.session import SessionStore


@pytest.fixture(scope="session")
def phantom_array():
    return fontan_phantom(512)


@pytest.fixture(scope="session")
def phantom_png(phantom_array):
    return encode_png(phantom_array)


@pytest.fixture
def store(tmp_path):
    return SessionStore(tmp_path / "store")


@pytest.fixture
def local_config():
    return SessionConfig(backend=BackendConfig(kind="local"))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
