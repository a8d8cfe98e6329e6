"""Zoo-side verification: tap activation summaries for cross-checking the
engine's extractor against the original implementation."""

from __future__ import annotations

import json

import numpy as np
import torch
from PIL import Image

from .export import build_model
from .recipes import ExportRecipe, recipe_for
from .writer import ArchiveError, read_archive

REL_TOL = 1e-3


class VerificationError(Exception):
    pass


def load_reference_image(path, resolution: int) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("RGB").resize((resolution, resolution), Image.BILINEAR)
        return np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 255.0


def normalize(image: np.ndarray, recipe: ExportRecipe) -> torch.Tensor:
    mean = np.asarray(recipe.mean, dtype=np.float32).reshape(3, 1, 1)
    std = np.asarray(recipe.std, dtype=np.float32).reshape(3, 1, 1)
    return torch.from_numpy((image - mean) / std).unsqueeze(0)


def tap_summaries(model, recipe: ExportRecipe, image: np.ndarray) -> dict[str, dict]:
    captured: dict[str, np.ndarray] = {}
    modules = dict(model.named_modules())
    hooks = []
    for tap_name, zoo_path in recipe.tap_modules.items():
        def hook(_mod, _in, out, name=tap_name):
            # copy immediately: downstream in-place relus mutate this tensor
            captured[name] = out.detach().numpy().copy()
        hooks.append(modules[zoo_path].register_forward_hook(hook))
    with torch.no_grad():
        model(normalize(image, recipe))
    for h in hooks:
        h.remove()

    out = {}
    for name, act in captured.items():
        flat = act.astype(np.float64).ravel()
        out[name] = {
            "shape": list(act.shape),
            "mean": float(flat.mean()),
            "std": float(flat.std()),
            "first8": [float(v) for v in flat[:8]],
        }
    return out


def compare_summaries(got: dict, expected: dict, rel: float = REL_TOL) -> list[str]:
    """Relative agreement per tap; returns the list of diverging taps."""
    bad = []
    for name, exp in expected.items():
        if name not in got:
            bad.append(name)
            continue
        g = got[name]
        if list(g["shape"]) != list(exp["shape"]):
            bad.append(name)
            continue
        scale = max(abs(exp["std"]), 1e-6)
        fine = (
            abs(g["mean"] - exp["mean"]) <= rel * max(abs(exp["mean"]), scale)
            and abs(g["std"] - exp["std"]) <= rel * scale
            and all(
                abs(a - b) <= rel * max(abs(b), scale)
                for a, b in zip(g["first8"], exp["first8"])
            )
        )
        if not fine:
            bad.append(name)
    return bad


def verify(archive_path, image_path, fixtures_path, backbone: str | None = None,
           init: str = "seeded", seed: int = 0, checkpoint: str | None = None,
           write_fixtures: bool = False) -> dict:
    """Validate the archive, run the zoo forward pass, and either write the
    tap fixture file or compare against it. Returns the report dict."""
    try:
        tensors, meta = read_archive(archive_path)
    except ArchiveError as e:
        raise VerificationError(f"refusing to verify: {e}") from e
    backbone = backbone or meta["backbone"]
    recipe = recipe_for(backbone)

    model = build_model(backbone, init, seed, checkpoint)
    from .export import collect_tensors

    produced = collect_tensors(model, recipe)
    missing = sorted(set(produced) - set(tensors))
    if missing:
        raise VerificationError(f"archive is missing tensors: {missing[:5]}")
    stale = [n for n in produced if not np.array_equal(produced[n], tensors[n])]
    if stale:
        raise VerificationError(
            f"archive tensors do not match the source model: {stale[:5]}"
        )

    image = load_reference_image(image_path, recipe.input_resolution)
    summaries = tap_summaries(model, recipe, image)
    report = {"backbone": backbone, "taps": summaries, "divergent": []}

    if write_fixtures:
        with open(fixtures_path, "w", encoding="utf-8") as f:
            json.dump(summaries, f, indent=1, sort_keys=True)
    else:
        with open(fixtures_path, "r", encoding="utf-8") as f:
            expected = json.load(f)
        report["divergent"] = compare_summaries(summaries, expected)
    return report
