"""Color palettes: K-means extraction from images, or user-provided files."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass
class Palette:
    colors: np.ndarray  # (Q, 3) float32 in [0, 1]
    source: str = "manual"
    objective_log: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.float32).reshape(-1, 3)
        if len(self.colors) < 1:
            raise ConfigurationError("palette must contain at least one color")
        if self.colors.min() < 0 or self.colors.max() > 1:
            raise ConfigurationError("palette components must lie in [0, 1]")


def nearest_color(c: np.ndarray, palette: Palette) -> tuple[int, float]:
    """Index and squared RGB distance of the closest palette color.

    Ties resolve to the lowest index (np.argmin's behavior).
    """
    d = ((palette.colors.astype(np.float64) - np.asarray(c, dtype=np.float64)) ** 2).sum(axis=1)
    idx = int(np.argmin(d))
    return idx, float(d[idx])


def _objective(pixels: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> float:
    return float(((pixels - centers[assign]) ** 2).sum())


def _assign(pixels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


def _seed_centers(pixels: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: subsequent centers drawn with probability ~ D^2."""
    n = len(pixels)
    centers = np.empty((q, 3), dtype=np.float64)
    centers[0] = pixels[rng.integers(n)]
    d2 = ((pixels - centers[0]) ** 2).sum(axis=1)
    for k in range(1, q):
        total = d2.sum()
        if total <= 0:
            centers[k] = pixels[rng.integers(n)]
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        idx = min(idx, n - 1)
        centers[k] = pixels[idx]
        d2 = np.minimum(d2, ((pixels - centers[k]) ** 2).sum(axis=1))
    return centers


def kmeans_extract(image: np.ndarray, q: int, seed: int, max_iters: int = 50) -> Palette:
    """Lloyd's algorithm over the RGB pixels of a (3, H, W) image.

    Deterministic for fixed (image, q, seed). Empty clusters are re-seeded to
    the pixel farthest from their current center. The recorded per-iteration
    objective is non-increasing.
    """
    if q < 1:
        raise ConfigurationError("palette size must be >= 1")
    if image.ndim != 3 or image.shape[0] != 3:
        raise ConfigurationError(f"kmeans_extract expects (3, H, W), got {image.shape}")
    pixels = image.reshape(3, -1).T.astype(np.float64)
    n = len(pixels)
    if q > n:
        raise ConfigurationError(f"palette size {q} exceeds pixel count {n}")

    rng = np.random.default_rng(seed)
    centers = _seed_centers(pixels, q, rng)

    log: list[float] = []
    assign = _assign(pixels, centers)
    for _ in range(max_iters):
        log.append(_objective(pixels, centers, assign))
        for k in range(q):
            members = pixels[assign == k]
            if len(members):
                centers[k] = members.mean(axis=0)
            else:
                far = int(np.argmax(((pixels - centers[k]) ** 2).sum(axis=1)))
                centers[k] = pixels[far]
        new_assign = _assign(pixels, centers)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    log.append(_objective(pixels, centers, assign))

    return Palette(np.clip(centers, 0.0, 1.0).astype(np.float32), "kmeans", log)


# ---------------------------------------------------------------------------
# palette files: one #RRGGBB per line


def load_palette_file(path) -> Palette:
    colors = []
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            s = line.strip()
            if not s:
                continue
            if not s.startswith("#") or len(s) != 7:
                raise ConfigurationError(f"{path}:{ln}: expected #RRGGBB, got '{s}'")
            try:
                rgb = [int(s[i : i + 2], 16) / 255.0 for i in (1, 3, 5)]
            except ValueError as e:
                raise ConfigurationError(f"{path}:{ln}: bad hex color '{s}'") from e
            colors.append(rgb)
    if not colors:
        raise ConfigurationError(f"{path}: no colors found")
    return Palette(np.asarray(colors, dtype=np.float32), "manual")


def format_palette(palette: Palette) -> str:
    lines = []
    for c in palette.colors:
        r, g, b = (int(round(float(v) * 255)) for v in c)
        lines.append(f"#{r:02X}{g:02X}{b:02X}")
    return "\n".join(lines) + "\n"


def save_palette_file(palette: Palette, path) -> None:
    import os

    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(format_palette(palette))
    os.replace(tmp, path)
