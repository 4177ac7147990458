import math

import numpy as np
import pytest
from PIL import Image

from schemas.ellipse import Ellipse


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_ellipse():
    """Factory: random_ellipse(rng, lo=1.0, hi=50.0) with semi-diameters in [lo, hi]."""

    def make(rng, lo=1.0, hi=50.0, spread=200.0):
        return Ellipse(
            cx=rng.uniform(-spread, spread),
            cy=rng.uniform(-spread, spread),
            rx=rng.uniform(lo, hi),
            ry=rng.uniform(lo, hi),
            theta=rng.uniform(-math.pi / 2, math.pi / 2),
        )

    return make


@pytest.fixture
def textured_board():
    """
    Factory: (height, width, band, rng) -> uint8 grey board whose rows
    band[0]:band[1] hold distinct per-row intensities, identical in every column.
    """

    def make(height, width, band, rng):
        board = np.zeros((height, width), dtype=np.uint8)
        rows = rng.choice(np.arange(60, 256), size=band[1] - band[0], replace=False)
        board[band[0]:band[1], :] = rows[:, None]
        return board

    return make


@pytest.fixture
def write_png():
    def write(path, array):
        Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path, format="PNG")
        return str(path)

    return write
