import io

import numpy as np
import pytest
from PIL import Image

from atelier.imaging import EdgeMap, MaskImage, RasterImage


def make_raster(width=64, height=64, color=(255, 255, 255)):
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[...] = color
    return RasterImage(pixels=px)


def random_raster(rng, width=64, height=64):
    return RasterImage(pixels=rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def random_mask(rng, width=64, height=64, fraction=0.3):
    values = (rng.random((height, width)) < fraction).astype(np.uint8) * 255
    if not values.any():
        values[0, 0] = 255
    return MaskImage(values=values)


def png_bytes(array):
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
