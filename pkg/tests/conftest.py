import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kleinlab import fixtures  # noqa: E402


@pytest.fixture(scope="session")
def schottky():
    return fixtures.schottky()


@pytest.fixture(scope="session")
def cusped():
    return fixtures.cusped()


@pytest.fixture(scope="session")
def cusped_ends():
    return fixtures.cusped_ends()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
