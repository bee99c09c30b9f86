import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcrisk import simulate  # noqa: E402


@pytest.fixture(scope="session")
def preset_data():
    """The default 11-cohort preset split into (training, validation)."""
    return simulate.simulate_preset(seed=20260810)


@pytest.fixture(scope="session")
def preset_train(preset_data):
    return preset_data[0]


@pytest.fixture(scope="session")
def preset_valid(preset_data):
    return preset_data[1]
