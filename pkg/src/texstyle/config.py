"""Run configuration: the hyperparameter record and its flat key=value file.

Defaults follow the published training setup: batch 8, lr 1e-2, point light
power 2 placed at radius [3, 5], Phong specular exponent 2, 512x512 renders,
1024x1024 texture, loss weights (1e4, 22, 2000) with the color weight
decaying over the run. The camera distance is model-dependent and has no
default: it must be supplied.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigurationError

# Input-path keys that may appear in config files alongside hyperparameters.
# "style" and "weights" hold comma-separated lists.
PATH_KEYS = ("mesh", "texture", "style", "palette_file", "weights")


@dataclass
class OptimConfig:
    iterations: int = 3000
    batch_size: int = 8
    learning_rate: float = 1e-2
    render_resolution: int = 512
    texture_resolution: int = 1024

    camera_distance: float = 0.0       # required: > 0
    camera_distance_max: float = 0.0   # optional upper bound for a range
    light_radius_min: float = 3.0
    light_radius_max: float = 5.0
    light_power: float = 2.0

    ambient: float = 0.1
    diffuse: float = 1.0
    specular: float = 0.5
    specular_exponent: float = 2.0
    fov_degrees: float = 45.0
    near: float = 0.1
    far: float = 100.0

    lambda_nnfm: float = 1e4
    lambda_content: float = 22.0
    lambda_color: float = 2000.0
    color_decay: str = "linear"        # linear | none

    style_backbone: str = "clip-rn50"  # vgg16 | clip-rn50 | toy
    content_backbone: str = "vgg16"
    smooth_style_features: bool = True
    content_background: str = "black"  # black | style
    backbone_resize: str = "native"    # native | none

    palette_q: int = 8
    kmeans_iters: int = 50
    style_subsample: int = 0           # 0 = exact nearest-neighbor search

    mode: str = "rendered"             # rendered | direct_texture
    seed: int = 0
    eval_snapshots: int = 8
    eval_elevation_degrees: float = 20.0

    def validate(self) -> None:
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        for key in ("batch_size", "render_resolution", "texture_resolution", "palette_q", "kmeans_iters"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"{key} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.camera_distance <= 0:
            raise ConfigurationError(
                "camera_distance is required and must be > 0 (it depends on the model)"
            )
        if self.camera_distance_max and self.camera_distance_max < self.camera_distance:
            raise ConfigurationError("camera_distance_max must be >= camera_distance")
        if not (0 < self.light_radius_min <= self.light_radius_max):
            raise ConfigurationError("light radius range must satisfy 0 < min <= max")
        if self.light_power < 0:
            raise ConfigurationError("light_power must be >= 0")
        if min(self.ambient, self.diffuse, self.specular) < 0:
            raise ConfigurationError("material weights must be >= 0")
        if not (0 < self.fov_degrees < 180):
            raise ConfigurationError("fov_degrees must be in (0, 180)")
        if not (0 < self.near < self.far):
            raise ConfigurationError("requires 0 < near < far")
        for key in ("lambda_nnfm", "lambda_content", "lambda_color"):
            if getattr(self, key) < 0:
                raise ConfigurationError(f"{key} must be >= 0")
        if self.color_decay not in ("linear", "none"):
            raise ConfigurationError("color_decay must be 'linear' or 'none'")
        for key in ("style_backbone", "content_backbone"):
            if getattr(self, key) not in ("vgg16", "clip-rn50", "toy"):
                raise ConfigurationError(f"{key} must be one of vgg16, clip-rn50, toy")
        if self.content_background not in ("black", "style"):
            raise ConfigurationError("content_background must be 'black' or 'style'")
        if self.backbone_resize not in ("native", "none"):
            raise ConfigurationError("backbone_resize must be 'native' or 'none'")
        if self.mode not in ("rendered", "direct_texture"):
            raise ConfigurationError("mode must be 'rendered' or 'direct_texture'")
        if self.style_subsample < 0:
            raise ConfigurationError("style_subsample must be >= 0")
        if self.eval_snapshots < 0:
            raise ConfigurationError("eval_snapshots must be >= 0")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")


def _coerce(key: str, raw: str, kind: type):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigurationError(f"config key '{key}': cannot parse '{raw}' as {kind.__name__}") from e


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat `key = value` lines; blank lines and #-comments are skipped."""
    out: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigurationError(f"{source}:{ln}: expected 'key = value', got '{s}'")
        key, _, value = s.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), str(path))


def apply_settings(cfg: OptimConfig, settings: dict[str, str]) -> dict[str, str]:
    """Assign typed config fields in place; returns leftover path settings.

    Unknown keys that are neither config fields nor path keys are errors.
    """
    by_name = {f.name: f for f in dataclasses.fields(OptimConfig)}
    paths: dict[str, str] = {}
    for key, raw in settings.items():
        if key in by_name:
            f = by_name[key]
            setattr(cfg, key, _coerce(key, raw, f.type if isinstance(f.type, type) else type(f.default)))
        elif key in PATH_KEYS:
            paths[key] = raw
        else:
            raise ConfigurationError(f"unknown config key '{key}'")
    return paths


def resolved_config_text(cfg: OptimConfig, paths: dict[str, str]) -> str:
    """Every effective value, re-feedable as a config file."""
    lines = []
    for key in PATH_KEYS:
        if paths.get(key):
            lines.append(f"{key} = {paths[key]}")
    for f in dataclasses.fields(OptimConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
