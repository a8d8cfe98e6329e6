"""Build zoo models and export their weights as NNWT archives."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .folding import fold_batchnorm
from .models import ClipResNet50Trunk, seeded_init, vgg16_truncated
from .recipes import ExportRecipe, recipe_for
from .writer import write_archive


class SourceError(Exception):
    pass


def build_model(backbone: str, init: str, seed: int = 0, checkpoint: str | None = None) -> nn.Module:
    """init: 'pretrained' (zoo download / checkpoint file) or 'seeded'
    (deterministic random weights, for offline verification)."""
    if backbone == "vgg16":
        if init == "pretrained" and checkpoint is None:
            try:
                model = vgg16_truncated(pretrained=True)
            except Exception as e:  # no network in sealed environments
                raise SourceError(
                    f"could not download torchvision vgg16 weights ({e}); "
                    "pass --checkpoint or --init seeded"
                ) from e
        else:
            model = vgg16_truncated(pretrained=False)
            if checkpoint:
                state = torch.load(checkpoint, map_location="cpu", weights_only=True)
                model.load_state_dict(
                    {k.removeprefix("features."): v for k, v in state.items()
                     if k.startswith("features.") and int(k.split(".")[1]) < 16},
                    strict=True,
                )
            else:
                seeded_init(model, seed)
    elif backbone == "clip-rn50":
        model = ClipResNet50Trunk()
        if init == "pretrained":
            if checkpoint is None:
                raise SourceError(
                    "CLIP weights are not auto-downloaded; pass --checkpoint "
                    "with a CLIP RN50 state dict (the text tower is ignored)"
                )
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
            if hasattr(state, "state_dict"):
                state = state.state_dict()
            model.load_clip_state_dict(state)
        else:
            seeded_init(model, seed)
    else:
        raise SourceError(f"unknown backbone '{backbone}'")
    model.eval()
    return model


def collect_tensors(model: nn.Module, recipe: ExportRecipe) -> dict[str, np.ndarray]:
    modules = dict(model.named_modules())
    tensors: dict[str, np.ndarray] = {}
    for zoo_path, stem in recipe.conv_map.items():
        if zoo_path not in modules:
            raise SourceError(f"source model has no module '{zoo_path}'")
        conv = modules[zoo_path]
        tensors[f"{stem}.weight"] = conv.weight.detach().numpy().copy()
        if conv.bias is not None:
            tensors[f"{stem}.bias"] = conv.bias.detach().numpy().copy()
    for zoo_path, stem in recipe.bn_map.items():
        if zoo_path not in modules:
            raise SourceError(f"source model has no module '{zoo_path}'")
        scale, shift = fold_batchnorm(modules[zoo_path])
        tensors[f"{stem}.scale"] = scale
        tensors[f"{stem}.shift"] = shift
    return tensors


def export(backbone: str, out_path, init: str = "pretrained", seed: int = 0,
           checkpoint: str | None = None) -> dict[str, np.ndarray]:
    recipe = recipe_for(backbone)
    model = build_model(backbone, init, seed, checkpoint)
    tensors = collect_tensors(model, recipe)
    write_archive(out_path, tensors, recipe.backbone, recipe.mean, recipe.std,
                  recipe.input_resolution)
    return tensors
