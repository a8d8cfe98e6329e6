import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_random(rng, shape, lo=0.2, hi=0.8):
    """Random values kept away from relu/clamp kinks so that finite
    differences stay valid."""
    return rng.uniform(lo, hi, size=shape).astype(np.float32)
