"""Command-line interface: stylize, ablate, extract-palette.

Exit codes are the process-level contract: 0 success, 1 configuration
error, 2 I/O error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .archive import load_archive
from .config import OptimConfig, apply_settings, load_config_file
from .errors import ArchiveFormatError, ConfigurationError, IncompleteArchiveError, NumericalError
from .images import load_image, save_image
from .mesh import load_obj
from .palette import Palette, format_palette, kmeans_extract, load_palette_file, save_palette_file
from .pipeline import Stylizer, prepare_asset

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


@dataclass
class JobManifest:
    mesh: str
    texture: str
    styles: list[str] = field(default_factory=list)
    palette_file: str | None = None
    weights: list[str] = field(default_factory=list)
    config: str | None = None
    out: str = "out"

    def input_paths(self) -> list[str]:
        paths = [self.mesh, self.texture, *self.styles, *self.weights]
        if self.palette_file:
            paths.append(self.palette_file)
        if self.config:
            paths.append(self.config)
        return paths


def _require_paths(manifest: JobManifest) -> None:
    for p in manifest.input_paths():
        if not os.path.exists(p):
            raise FileNotFoundError(f"input path does not exist: {p}")


def _resolve_config(manifest: JobManifest, overrides: dict[str, str]) -> OptimConfig:
    """defaults -> config file -> CLI overrides, later wins."""
    cfg = OptimConfig()
    if manifest.config:
        file_paths = apply_settings(cfg, load_config_file(manifest.config))
        if not manifest.mesh and "mesh" in file_paths:
            manifest.mesh = file_paths["mesh"]
        if not manifest.texture and "texture" in file_paths:
            manifest.texture = file_paths["texture"]
        if not manifest.styles and "style" in file_paths:
            manifest.styles = [s for s in file_paths["style"].split(",") if s]
        if not manifest.weights and "weights" in file_paths:
            manifest.weights = [s for s in file_paths["weights"].split(",") if s]
        if manifest.palette_file is None and "palette_file" in file_paths:
            manifest.palette_file = file_paths["palette_file"]
    leftover = apply_settings(cfg, overrides)
    if leftover:
        raise ConfigurationError(f"path keys not allowed as overrides: {sorted(leftover)}")
    return cfg


def _collect_overrides(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for kv in args.set or []:
        if "=" not in kv:
            raise ConfigurationError(f"--set expects key=value, got '{kv}'")
        key, _, value = kv.partition("=")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.iterations is not None:
        overrides["iterations"] = str(args.iterations)
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.backbone is not None:
        overrides["style_backbone"] = args.backbone
        if args.backbone == "toy":
            overrides.setdefault("content_backbone", "toy")
    return overrides


def _load_job(manifest: JobManifest, cfg: OptimConfig):
    mesh = load_obj(manifest.mesh)
    texture = load_image(manifest.texture)
    styles = [load_image(p) for p in manifest.styles]
    archives = {}
    for w in manifest.weights:
        a = load_archive(w)
        archives[a.backbone] = a
    palette: Palette | None = None
    if manifest.palette_file:
        palette = load_palette_file(manifest.palette_file)
    asset = prepare_asset(mesh, texture, styles, cfg, palette)
    return asset, archives


def _paths_record(manifest: JobManifest) -> dict[str, str]:
    rec = {"mesh": manifest.mesh, "texture": manifest.texture}
    if manifest.styles:
        rec["style"] = ",".join(manifest.styles)
    if manifest.palette_file:
        rec["palette_file"] = manifest.palette_file
    if manifest.weights:
        rec["weights"] = ",".join(manifest.weights)
    return rec


def cmd_stylize(manifest: JobManifest, cfg: OptimConfig) -> int:
    _require_paths(manifest)
    asset, archives = _load_job(manifest, cfg)
    stylizer = Stylizer(asset, cfg, archives)
    stylizer.run(manifest.out, _paths_record(manifest))
    return EXIT_OK


def cmd_ablate(manifest: JobManifest, cfg: OptimConfig, axis: str, values: list[str]) -> int:
    if axis not in ("camera_distance", "texture_resolution", "style_count"):
        raise ConfigurationError(f"unknown ablation axis '{axis}'")
    if len(values) < 2:
        raise ConfigurationError("ablation needs at least 2 values")
    _require_paths(manifest)
    os.makedirs(manifest.out, exist_ok=True)

    first_renders = []
    for value in values:
        run_cfg = copy.deepcopy(cfg)
        run_manifest = copy.deepcopy(manifest)
        label = value
        if axis == "camera_distance":
            run_cfg.camera_distance = float(value)
            run_cfg.camera_distance_max = 0.0
        elif axis == "texture_resolution":
            run_cfg.texture_resolution = int(value)
        else:
            count = int(value)
            if count < 1 or count > len(manifest.styles):
                raise ConfigurationError(
                    f"style_count {count} out of range (have {len(manifest.styles)} styles)")
            run_manifest.styles = manifest.styles[:count]
        run_manifest.out = os.path.join(manifest.out, f"{axis}_{label}")
        asset, archives = _load_job(run_manifest, run_cfg)
        Stylizer(asset, run_cfg, archives).run(run_manifest.out, _paths_record(run_manifest))
        first_renders.append(os.path.join(run_manifest.out, "renders", "00.png"))

    if all(os.path.exists(p) for p in first_renders):
        sheets = [load_image(p) for p in first_renders]
        sheet = np.concatenate(sheets, axis=2)
        save_image(sheet, os.path.join(manifest.out, "contact_sheet.png"))
    return EXIT_OK


def cmd_extract_palette(image_path: str, q: int, seed: int, out_path: str | None) -> int:
    if not os.path.exists(image_path):
        raise FileNotFoundError(f"input path does not exist: {image_path}")
    image = load_image(image_path)
    palette = kmeans_extract(image, q, seed)
    sys.stdout.write(format_palette(palette))
    if out_path is None:
        out_path = os.path.splitext(image_path)[0] + ".palette.txt"
    save_palette_file(palette, out_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="texstyle", description="Texture stylization for 3D meshes")
    sub = p.add_subparsers(dest="command", required=True)

    def add_job_flags(sp):
        sp.add_argument("--mesh", default="", help="OBJ mesh path")
        sp.add_argument("--texture", default="", help="base texture PNG")
        sp.add_argument("--style", action="append", default=[], help="style image (repeatable; first is primary)")
        sp.add_argument("--palette-file", default=None, help="manual palette (#RRGGBB lines)")
        sp.add_argument("--palette-q", type=int, default=None, help="K-means palette size")
        sp.add_argument("--config", default=None, help="key = value config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--iterations", type=int, default=None)
        sp.add_argument("--mode", choices=("rendered", "direct_texture"), default=None)
        sp.add_argument("--backbone", choices=("vgg16", "clip-rn50", "toy"), default=None,
                        help="style backbone")
        sp.add_argument("--weights", action="append", default=[], help="weight archive (repeatable)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")

    sp = sub.add_parser("stylize", help="optimize a style texture")
    add_job_flags(sp)

    sp = sub.add_parser("ablate", help="run one job across an axis of values")
    add_job_flags(sp)
    sp.add_argument("--axis", required=True,
                    choices=("camera_distance", "texture_resolution", "style_count"))
    sp.add_argument("--values", required=True, help="comma-separated values")

    sp = sub.add_parser("extract-palette", help="K-means palette from an image")
    sp.add_argument("image", help="input image")
    sp.add_argument("--q", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="palette file to write")

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract-palette":
            return cmd_extract_palette(args.image, args.q, args.seed, args.out)

        manifest = JobManifest(
            mesh=args.mesh,
            texture=args.texture,
            styles=list(args.style),
            palette_file=args.palette_file,
            weights=list(args.weights),
            config=args.config,
            out=args.out,
        )
        overrides = _collect_overrides(args)
        if args.palette_q is not None:
            overrides["palette_q"] = str(args.palette_q)
        cfg = _resolve_config(manifest, overrides)
        if not manifest.mesh:
            raise ConfigurationError("--mesh is required")
        if not manifest.texture:
            raise ConfigurationError("--texture is required")

        if args.command == "stylize":
            return cmd_stylize(manifest, cfg)
        if args.command == "ablate":
            return cmd_ablate(manifest, cfg, args.axis, args.values.split(","))
        raise ConfigurationError(f"unknown command '{args.command}'")
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ArchiveFormatError, IncompleteArchiveError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
