"""Analysis metrics for optimized textures (ablation experiments)."""

from __future__ import annotations

import numpy as np


def radial_autocorrelation(texture: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Radially averaged, normalized spatial autocorrelation of a (C, H, W)
    texture, computed with wrap-around (textures tile)."""
    x = texture.astype(np.float64) - texture.mean(axis=(1, 2), keepdims=True)
    spec = np.fft.fft2(x, axes=(1, 2))
    ac = np.fft.ifft2(np.abs(spec) ** 2, axes=(1, 2)).real.mean(axis=0)
    if ac[0, 0] <= 0:
        return np.array([1.0])
    ac = ac / ac[0, 0]
    h, w = ac.shape
    if max_lag is None:
        max_lag = min(h, w) // 2
    prof = np.zeros(max_lag + 1)
    cnt = np.zeros(max_lag + 1)
    dy = np.minimum(np.arange(h), h - np.arange(h))
    dx = np.minimum(np.arange(w), w - np.arange(w))
    lag = np.rint(np.hypot(dy[:, None], dx[None, :])).astype(int)
    inside = lag <= max_lag
    np.add.at(prof, lag[inside], ac[inside])
    np.add.at(cnt, lag[inside], 1)
    return prof / np.maximum(cnt, 1)


def autocorr_length(texture: np.ndarray, max_lag: int | None = None) -> float:
    """Integral correlation scale: the positive part of the radial
    autocorrelation summed over lags >= 1. Robust against single-texel
    speckle, which only shifts the lag-0 term."""
    prof = radial_autocorrelation(texture, max_lag)[1:]
    return float(prof[prof > 0].sum())


def seam_discontinuity(texture: np.ndarray) -> float:
    """Mean absolute cross-seam texel difference for the two-quad seam
    fixture (see mesh.make_seam_quads): texture columns W-1 and 0 abut on
    the 3D surface (same rows)."""
    _, _, w = texture.shape
    return float(np.abs(texture[:, :, w - 1] - texture[:, :, 0]).mean())
