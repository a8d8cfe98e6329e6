"""The stylization loop: randomized scenes, two-branch rendering, losses,
and Adam updates of the additive style texture.

Each iteration renders the clamped sum of the fixed base texture and the
learned style texture from randomized cameras/lights. The style branch
composites the primary style image behind the object before feature
extraction; the content branch keeps a black background (config-switchable).
The color loss acts on the composited texture directly, so it is evaluated
once per iteration rather than per batch element.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .archive import WeightArchive
from .backbones import (
    BackboneSpec,
    FeatureSet,
    bind_weights,
    build_spec,
    concat_style_features,
    extract_features,
    normalize_input,
    toy_archive,
)
from .config import OptimConfig, resolved_config_text
from .errors import ConfigurationError, NumericalError
from .images import resize_image, save_image
from .losses import LossReport, LossWeights, color_palette_loss, content_loss, nnfm_loss, total_loss
from .mesh import Mesh
from .optim import Adam
from .palette import Palette, kmeans_extract
from .renderer import Camera, GBuffer, Material, PointLight, composite_background, rasterize, shade
from .tensor import Tensor


@dataclass
class SceneSample:
    camera: Camera
    light: PointLight


@dataclass
class StyleAsset:
    mesh: Mesh
    base_texture: np.ndarray            # (3, H, W), fixed
    style_texture: Tensor               # (1, 3, H, W), learned, zero-init
    style_images: list[np.ndarray] = field(default_factory=list)
    primary_style: int = 0
    palette: Palette | None = None


def _unit_gaussian_dir(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0])
    return v / n


def _up_for(direction: np.ndarray) -> np.ndarray:
    if abs(direction[2]) > 0.999:
        return np.array([1.0, 0.0, 0.0])
    return np.array([0.0, 0.0, 1.0])


def sample_scene(rng: np.random.Generator, cfg: OptimConfig, centroid: np.ndarray) -> SceneSample:
    """Camera uniform on the sphere (normalized Gaussians), light uniform on
    the upper hemisphere with radius in the configured shell."""
    cam_dir = _unit_gaussian_dir(rng)
    r = cfg.camera_distance
    if cfg.camera_distance_max > cfg.camera_distance:
        r = rng.uniform(cfg.camera_distance, cfg.camera_distance_max)
    eye = centroid + r * cam_dir
    camera = Camera(
        eye=eye.astype(np.float64),
        target=centroid.astype(np.float64),
        up=_up_for(cam_dir),
        fov=float(np.deg2rad(cfg.fov_degrees)),
        near=cfg.near,
        far=cfg.far,
    )
    light_dir = _unit_gaussian_dir(rng)
    light_dir[2] = abs(light_dir[2])
    radius = rng.uniform(cfg.light_radius_min, cfg.light_radius_max)
    light = PointLight(position=centroid + radius * light_dir, power=cfg.light_power)
    return SceneSample(camera, light)


def prepare_asset(
    mesh: Mesh,
    base_texture: np.ndarray,
    style_images: list[np.ndarray],
    cfg: OptimConfig,
    palette: Palette | None = None,
    primary_style: int = 0,
) -> StyleAsset:
    """Resize the base texture to the working resolution, zero-init the style
    texture, and extract a palette from the primary style image if needed."""
    res = cfg.texture_resolution
    if base_texture.shape[1:] != (res, res):
        base_texture = resize_image(base_texture, res, res)
    style_texture = Tensor.zeros((1, 3, res, res), requires_grad=True)

    if palette is None and cfg.lambda_color > 0:
        if not style_images:
            raise ConfigurationError("color loss enabled but no style image or palette given")
        kseed = int(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1,)).generate_state(1)[0])
        palette = kmeans_extract(style_images[primary_style], cfg.palette_q, kseed, cfg.kmeans_iters)

    return StyleAsset(mesh, base_texture.astype(np.float32), style_texture,
                      list(style_images), primary_style, palette)


class Stylizer:
    """Owns the optimizer state and cached style features for one run."""

    def __init__(self, asset: StyleAsset, cfg: OptimConfig,
                 archives: dict[str, WeightArchive] | None = None):
        cfg.validate()
        if asset.style_texture.data.shape != (1, 3, cfg.texture_resolution, cfg.texture_resolution):
            raise ConfigurationError("style texture extents must match texture_resolution")
        self.asset = asset
        self.cfg = cfg
        self.archives = dict(archives or {})
        self.weights = LossWeights(cfg.lambda_nnfm, cfg.lambda_content, cfg.lambda_color, cfg.color_decay)
        self.material = Material(cfg.specular_exponent, cfg.diffuse, cfg.specular, cfg.ambient)
        self.centroid = asset.mesh.centroid().astype(np.float64)
        self.scene_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0,)))
        self.adam = Adam(asset.style_texture, lr=cfg.learning_rate)
        self.base = Tensor(asset.base_texture[None])
        self.last_scene: SceneSample | None = None

        self._style: tuple[BackboneSpec, WeightArchive, dict] | None = None
        self._content: tuple[BackboneSpec, WeightArchive, dict] | None = None
        self.style_features: FeatureSet | None = None
        self.style_background: np.ndarray | None = None
        self._direct_content_ref: FeatureSet | None = None

        if cfg.lambda_nnfm > 0:
            if not asset.style_images:
                raise ConfigurationError("style loss enabled but no style images given")
            self._style = self._bind_backbone(cfg.style_backbone)
            self.style_features = self._build_style_features()
            bg = asset.style_images[asset.primary_style]
            self.style_background = resize_image(bg, cfg.render_resolution, cfg.render_resolution)
        if cfg.lambda_content > 0:
            self._content = self._bind_backbone(cfg.content_backbone)
        if cfg.lambda_color > 0 and asset.palette is None:
            raise ConfigurationError("color loss enabled but asset has no palette")

    def _bind_backbone(self, backbone_id: str):
        spec = build_spec(backbone_id)
        if backbone_id in self.archives:
            archive = self.archives[backbone_id]
        elif backbone_id == "toy":
            tseed = int(np.random.SeedSequence(entropy=self.cfg.seed, spawn_key=(2,)).generate_state(1)[0])
            archive = toy_archive(tseed)
        else:
            raise ConfigurationError(f"no weight archive provided for backbone '{backbone_id}'")
        return spec, archive, bind_weights(spec, archive)

    def _featurize(self, image: Tensor, bundle, smooth: bool) -> FeatureSet:
        spec, archive, weights = bundle
        resize = self.cfg.backbone_resize == "native"
        normed = normalize_input(image, archive.mean, archive.std, archive.input_resolution, resize)
        return extract_features(normed, spec, weights, smooth=smooth)

    def _build_style_features(self) -> FeatureSet:
        sets = []
        for img in self.asset.style_images:
            t = Tensor(img[None])
            sets.append(self._featurize(t, self._style, self.cfg.smooth_style_features))
        merged = concat_style_features(sets)
        cap = self.cfg.style_subsample
        if cap > 0:
            rng = np.random.default_rng(np.random.SeedSequence(entropy=self.cfg.seed, spawn_key=(3,)))
            taps = {}
            for name in merged.tap_names():
                bag = merged.vectors(name)
                if len(bag) > cap:
                    idx = np.sort(rng.choice(len(bag), cap, replace=False))
                    bag = bag[idx]
                taps[name] = Tensor(bag.T.reshape(1, bag.shape[1], 1, -1))
            merged = FeatureSet(taps)
        return merged

    # ------------------------------------------------------------------
    # iterations

    def combined_texture(self) -> Tensor:
        return T.clamp01(T.add(self.base, self.asset.style_texture))

    def _mean(self, terms: list[Tensor]) -> Tensor:
        out = terms[0]
        for t in terms[1:]:
            out = T.add(out, t)
        return T.scale(out, 1.0 / len(terms))

    def _terms_for_render(self, combined: Tensor) -> dict[str, Tensor]:
        cfg = self.cfg
        nnfm_terms: list[Tensor] = []
        content_terms: list[Tensor] = []
        for _ in range(cfg.batch_size):
            scene = sample_scene(self.scene_rng, cfg, self.centroid)
            self.last_scene = scene
            g = rasterize(self.asset.mesh, scene.camera, cfg.render_resolution)
            render = shade(g, combined, scene.light, self.material, scene.camera)
            if cfg.lambda_nnfm > 0:
                styled = composite_background(render, g.mask, self.style_background)
                f_i = self._featurize(styled, self._style, cfg.smooth_style_features)
                nnfm_terms.append(nnfm_loss(f_i, self.style_features))
            if cfg.lambda_content > 0:
                content_img = render
                if cfg.content_background == "style":
                    content_img = composite_background(render, g.mask, self.style_background)
                f_i = self._featurize(content_img, self._content, smooth=False)
                ref_render = shade(g, self.base, scene.light, self.material, scene.camera)
                if cfg.content_background == "style":
                    ref_render = composite_background(ref_render, g.mask, self.style_background)
                f_c = self._featurize(ref_render, self._content, smooth=False)
                content_terms.append(content_loss(f_c, f_i))
        terms: dict[str, Tensor] = {}
        if nnfm_terms:
            terms["nnfm"] = self._mean(nnfm_terms)
        if content_terms:
            terms["content"] = self._mean(content_terms)
        return terms

    def _terms_for_direct(self, combined: Tensor) -> dict[str, Tensor]:
        cfg = self.cfg
        terms: dict[str, Tensor] = {}
        if cfg.lambda_nnfm > 0:
            f_i = self._featurize(combined, self._style, cfg.smooth_style_features)
            terms["nnfm"] = nnfm_loss(f_i, self.style_features)
        if cfg.lambda_content > 0:
            if self._direct_content_ref is None:
                self._direct_content_ref = self._featurize(
                    T.clamp01(self.base), self._content, smooth=False)
            f_i = self._featurize(combined, self._content, smooth=False)
            terms["content"] = content_loss(self._direct_content_ref, f_i)
        return terms

    def _iterate(self, iteration: int, direct: bool) -> LossReport:
        cfg = self.cfg
        self.asset.style_texture.zero_grad()
        try:
            combined = self.combined_texture()
            terms = self._terms_for_direct(combined) if direct else self._terms_for_render(combined)
            if cfg.lambda_color > 0:
                terms["color"] = color_palette_loss(combined, self.asset.palette)
            total, report = total_loss(terms, self.weights, iteration, cfg.iterations)
        except NumericalError as e:
            raise NumericalError(f"{e}; {self._scene_note()}") from e
        if not np.isfinite(report.total):
            raise NumericalError(f"non-finite total loss at iteration {iteration}; {self._scene_note()}")
        T.backward(total)
        self.adam.step()
        return report

    def _scene_note(self) -> str:
        if self.last_scene is None:
            return "no scene sampled yet"
        s = self.last_scene
        return (f"last scene: camera eye={np.array2string(s.camera.eye, precision=4)}, "
                f"light={np.array2string(np.asarray(s.light.position, dtype=np.float64), precision=4)}")

    def train_iteration(self, iteration: int) -> LossReport:
        return self._iterate(iteration, direct=False)

    def direct_texture_iteration(self, iteration: int) -> LossReport:
        return self._iterate(iteration, direct=True)

    # ------------------------------------------------------------------
    # full runs

    def snapshot_cameras(self) -> list[Camera]:
        cams = []
        r = self.cfg.camera_distance
        elev = np.deg2rad(self.cfg.eval_elevation_degrees)
        for k in range(self.cfg.eval_snapshots):
            az = 2.0 * np.pi * k / max(self.cfg.eval_snapshots, 1)
            direction = np.array(
                [np.cos(elev) * np.cos(az), np.cos(elev) * np.sin(az), np.sin(elev)])
            cams.append(Camera(
                eye=self.centroid + r * direction,
                target=self.centroid.copy(),
                up=_up_for(direction),
                fov=float(np.deg2rad(self.cfg.fov_degrees)),
                near=self.cfg.near,
                far=self.cfg.far,
            ))
        return cams

    def render_snapshot(self, camera: Camera, texture: Tensor) -> np.ndarray:
        g = rasterize(self.asset.mesh, camera, self.cfg.render_resolution)
        light = PointLight(position=camera.eye.copy(), power=self.cfg.light_power)
        return shade(g, texture, light, self.material, camera).data[0]

    def run(self, out_dir, paths: dict[str, str] | None = None) -> np.ndarray:
        """Execute the configured iterations and write all artifacts.

        Returns the final style texture as a (3, H, W) array. Artifacts:
        style_texture.png, combined_texture.png, renders/NN.png, loss.csv,
        resolved_config.txt. Files are written via temp + rename.
        """
        cfg = self.cfg
        os.makedirs(out_dir, exist_ok=True)
        renders_dir = os.path.join(out_dir, "renders")
        os.makedirs(renders_dir, exist_ok=True)

        csv_tmp = os.path.join(out_dir, "loss.csv.tmp")
        direct = cfg.mode == "direct_texture"
        with open(csv_tmp, "w", encoding="utf-8") as csv:
            csv.write(LossReport.CSV_HEADER + "\n")
            for it in range(cfg.iterations):
                report = self._iterate(it, direct)
                csv.write(report.csv_row() + "\n")
        os.replace(csv_tmp, os.path.join(out_dir, "loss.csv"))

        ts = self.asset.style_texture.data[0]
        save_image(np.clip(ts, 0.0, 1.0), os.path.join(out_dir, "style_texture.png"))
        combined = self.combined_texture().data[0]
        save_image(combined, os.path.join(out_dir, "combined_texture.png"))

        final_tex = Tensor(combined[None])
        for i, cam in enumerate(self.snapshot_cameras()):
            save_image(self.render_snapshot(cam, final_tex), os.path.join(renders_dir, f"{i:02d}.png"))

        text = resolved_config_text(cfg, paths or {})
        cfg_tmp = os.path.join(out_dir, "resolved_config.txt.tmp")
        with open(cfg_tmp, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(cfg_tmp, os.path.join(out_dir, "resolved_config.txt"))

        return ts.copy()
