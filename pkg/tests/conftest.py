import pytest

from oncoctrl.patient import PARAM_PRESETS, find_equilibria

DT = 1.0 / 48.0


@pytest.fixture(scope="session")
def calibrated():
    return PARAM_PRESETS["equilibria-calibrated"]


@pytest.fixture(scope="session")
def equilibria(calibrated):
    return find_equilibria(calibrated)
