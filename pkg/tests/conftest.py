import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from afcosserat import grid_fem as gf  # noqa: E402
from afcosserat import quasistatic as qs  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def params():
    return qs.reference_material()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mesh8():
    return gf.build_mesh(8, 8)


@pytest.fixture(scope="session")
def mesh32():
    return gf.build_mesh(32, 32)
