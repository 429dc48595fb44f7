import numpy as np
import pytest

from advsmo.image_core import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_image(rng, width=16, height=16, channels=1) -> Image:
    return Image.from_array(rng.uniform(0.0, 1.0, size=(height, width, channels)))


def stripe_image(width=32, height=32, period=4, amplitude=0.25, mean=0.5,
                 angle_deg=90.0, phase=0.0) -> Image:
    """Sinusoidal stripes at a given orientation; angle 90 gives vertical bars."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    t = np.radians(angle_deg)
    coord = xs * np.sin(t) + ys * np.cos(t)
    values = mean + amplitude * np.sin(2.0 * np.pi * coord / period + phase)
    return Image.from_array(np.clip(values, 0.0, 1.0))
