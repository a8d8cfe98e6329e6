import numpy as np
import pytest
from PIL import Image


@pytest.fixture(scope="session")
def reference_image(tmp_path_factory):
    """Deterministic 224x224 test photo: gradients, rings, and blocks."""
    n = 224
    yy, xx = np.mgrid[0:n, 0:n] / n
    rr = np.hypot(yy - 0.4, xx - 0.6)
    img = np.stack(
        [
            0.5 + 0.4 * np.sin(8 * np.pi * rr),
            np.clip(yy * 1.2 - 0.1, 0, 1),
            0.5 + 0.5 * np.sin(2 * np.pi * 3 * xx) * np.cos(2 * np.pi * 2 * yy),
        ],
        axis=-1,
    )
    img[40:80, 30:90] = (0.9, 0.15, 0.2)
    img[150:200, 140:210] = (0.1, 0.8, 0.3)
    u8 = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
    path = tmp_path_factory.mktemp("ref") / "reference.png"
    Image.fromarray(u8, mode="RGB").save(path)
    return path
