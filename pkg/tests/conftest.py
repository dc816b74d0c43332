import math

import pytest

from ionoptics import BeamProfileParams

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="session")
def beam_a() -> BeamProfileParams:
    return BeamProfileParams(omega0=TWO_PI * 1910.0, center_um=0.0, width_um=1.86)


@pytest.fixture(scope="session")
def beam_b() -> BeamProfileParams:
    return BeamProfileParams(omega0=TWO_PI * 2790.0, center_um=4.31, width_um=1.88)
