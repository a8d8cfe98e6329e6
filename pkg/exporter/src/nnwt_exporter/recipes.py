"""Export recipes: which zoo tensors map to which archive names, plus the
normalization metadata the engine stores alongside the weights."""

from __future__ import annotations

from dataclasses import dataclass, field

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)

VGG_CONV_INDICES = (0, 2, 5, 7, 10, 12, 14)
VGG_TAP_INDICES = (11, 13, 15)

CLIP_STAGE_BLOCKS = {"layer1": 3, "layer2": 4, "layer3": 6, "layer4": 3}


@dataclass
class ExportRecipe:
    backbone: str
    source: str                       # human-readable provenance note
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    input_resolution: int
    # zoo module path -> archive name stem; convs export <stem>.weight
    # (+ .bias when present), batch norms fold into <stem>.scale/.shift
    conv_map: dict[str, str] = field(default_factory=dict)
    bn_map: dict[str, str] = field(default_factory=dict)
    tap_modules: dict[str, str] = field(default_factory=dict)  # archive tap -> zoo module path


def vgg16_recipe() -> ExportRecipe:
    conv_map = {str(i): f"features.{i}" for i in VGG_CONV_INDICES}
    taps = {f"features.{i}": str(i) for i in VGG_TAP_INDICES}
    return ExportRecipe(
        backbone="vgg16",
        source="torchvision vgg16 (ImageNet)",
        mean=IMAGENET_MEAN,
        std=IMAGENET_STD,
        input_resolution=224,
        conv_map=conv_map,
        tap_modules=taps,
    )


def clip_rn50_recipe() -> ExportRecipe:
    conv_map = {"conv1": "stem.conv1", "conv2": "stem.conv2", "conv3": "stem.conv3"}
    bn_map = {"bn1": "stem.bn1", "bn2": "stem.bn2", "bn3": "stem.bn3"}
    taps = {}
    for stage, blocks in CLIP_STAGE_BLOCKS.items():
        for b in range(blocks):
            zoo = f"{stage}.{b}"
            for c in ("conv1", "conv2", "conv3"):
                conv_map[f"{zoo}.{c}"] = f"{zoo}.{c}"
            for bn in ("bn1", "bn2", "bn3"):
                bn_map[f"{zoo}.{bn}"] = f"{zoo}.{bn}"
            if b == 0:  # only the first block of a stage has a shortcut projection
                conv_map[f"{zoo}.downsample.0"] = f"{zoo}.downsample.conv"
                bn_map[f"{zoo}.downsample.1"] = f"{zoo}.downsample.bn"
    for b in range(CLIP_STAGE_BLOCKS["layer3"]):
        taps[f"layer3.{b}.bn2"] = f"layer3.{b}.bn2"
    for b in range(CLIP_STAGE_BLOCKS["layer4"]):
        taps[f"layer4.{b}.bn2"] = f"layer4.{b}.bn2"
    return ExportRecipe(
        backbone="clip-rn50",
        source="CLIP ResNet50 visual trunk",
        mean=CLIP_MEAN,
        std=CLIP_STD,
        input_resolution=224,
        conv_map=conv_map,
        bn_map=bn_map,
        tap_modules=taps,
    )


def recipe_for(backbone: str) -> ExportRecipe:
    if backbone == "vgg16":
        return vgg16_recipe()
    if backbone == "clip-rn50":
        return clip_rn50_recipe()
    raise ValueError(f"no recipe for backbone '{backbone}'")
