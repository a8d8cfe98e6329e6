"""PNG image I/O. Values map to float32 in [0, 1], channel-first layout."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import ConfigurationError


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB/RGBA PNG (alpha ignored) as a (3, H, W) float array."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.shape[-1] not in (3, 4):
        raise ConfigurationError(f"{path}: expected RGB or RGBA, got shape {arr.shape}")
    rgb = arr[..., :3].astype(np.float32) / 255.0
    return np.ascontiguousarray(rgb.transpose(2, 0, 1))


def save_image(arr: np.ndarray, path) -> None:
    """Write a (3, H, W) [0,1] array as 8-bit RGB PNG, atomically."""
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ConfigurationError(f"save_image expects (3, H, W), got {arr.shape}")
    u8 = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    tmp = f"{path}.tmp"
    Image.fromarray(u8, mode="RGB").save(tmp, format="PNG")
    os.replace(tmp, path)


def resize_image(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a (3, H, W) array (plain data, no gradients)."""
    from . import tensor as T

    t = T.Tensor(arr[None])
    return T.bilinear_resize(t, height, width).data[0]
