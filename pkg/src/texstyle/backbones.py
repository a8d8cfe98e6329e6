"""Backbone graphs, weight binding, and feature extraction.

A backbone is a list of named nodes in topological order; batch norms arrive
pre-folded as per-channel (scale, shift) pairs, so the op set stays small:
conv, relu, pools, affine, add. Tap nodes are the layers whose activations
are exported as feature sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .archive import WeightArchive
from .errors import ConfigurationError, IncompleteArchiveError
from .tensor import Tensor

BACKBONE_IDS = ("vgg16", "clip-rn50", "toy")

# Input normalization statistics by backbone (per-channel mean/std).
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


@dataclass(frozen=True)
class LayerNode:
    name: str
    op: str  # conv | relu | maxpool | avgpool | affine | add
    inputs: tuple[str, ...]
    params: dict = field(default_factory=dict)


@dataclass
class BackboneSpec:
    backbone_id: str
    nodes: list[LayerNode]
    taps: tuple[str, ...]

    def node_names(self) -> set[str]:
        return {n.name for n in self.nodes}

    def required_tensors(self) -> list[tuple[str, tuple[int, ...]]]:
        """(archive tensor name, expected shape) pairs the spec consumes."""
        out = []
        for n in self.nodes:
            if n.op == "conv":
                oc, ic, k = n.params["out_c"], n.params["in_c"], n.params["k"]
                out.append((f"{n.name}.weight", (oc, ic, k, k)))
                if n.params.get("bias", True):
                    out.append((f"{n.name}.bias", (oc,)))
            elif n.op == "affine":
                c = n.params["channels"]
                out.append((f"{n.name}.scale", (c,)))
                out.append((f"{n.name}.shift", (c,)))
        return out


class FeatureSet:
    """Named bags of feature vectors, one bag per tap.

    Each tap holds the raw (B, C, H, W) activation tensor; viewed as a bag it
    contains B*H*W vectors of dimension C, ordered by (batch, y, x).
    """

    def __init__(self, taps: dict[str, Tensor]):
        self.taps = dict(taps)

    def tap_names(self) -> tuple[str, ...]:
        return tuple(self.taps)

    def vectors(self, name: str) -> np.ndarray:
        """Detached (count, C) view of one tap's vector bag."""
        d = self.taps[name].data
        b, c, h, w = d.shape
        return d.transpose(0, 2, 3, 1).reshape(b * h * w, c)

    def vector_count(self) -> int:
        return sum(
            t.data.shape[0] * t.data.shape[2] * t.data.shape[3] for t in self.taps.values()
        )


def concat_style_features(sets: list[FeatureSet]) -> FeatureSet:
    """Merge the per-tap vector bags of several (constant) feature sets."""
    if not sets:
        raise ConfigurationError("concat_style_features: no feature sets given")
    names = sets[0].tap_names()
    for s in sets[1:]:
        if s.tap_names() != names:
            raise ConfigurationError(
                f"concat_style_features: tap mismatch {s.tap_names()} vs {names}"
            )
    merged: dict[str, Tensor] = {}
    for name in names:
        widths = {s.taps[name].data.shape[1] for s in sets}
        if len(widths) != 1:
            raise ConfigurationError(f"concat_style_features: channel mismatch at '{name}'")
        c = widths.pop()
        bags = [s.vectors(name) for s in sets]
        stacked = np.concatenate(bags, axis=0)  # (N_total, C)
        merged[name] = Tensor(stacked.T.reshape(1, c, 1, -1))
    return FeatureSet(merged)


# ---------------------------------------------------------------------------
# weight binding


def bind_weights(spec: BackboneSpec, archive: WeightArchive) -> dict[str, np.ndarray]:
    if archive.backbone != spec.backbone_id:
        raise ConfigurationError(
            f"archive holds '{archive.backbone}' weights, spec needs '{spec.backbone_id}'"
        )
    bound: dict[str, np.ndarray] = {}
    for name, shape in spec.required_tensors():
        if name not in archive.tensors:
            raise IncompleteArchiveError(f"archive missing tensor '{name}'")
        arr = archive.tensors[name]
        if arr.shape != shape:
            raise IncompleteArchiveError(
                f"tensor '{name}' has shape {arr.shape}, spec expects {shape}"
            )
        bound[name] = arr
    return bound


# ---------------------------------------------------------------------------
# preprocessing and execution


def normalize_input(image: Tensor, mean, std, resolution: int = 0, resize: bool = True) -> Tensor:
    """Per-channel (x - mean) / std, resized to the backbone resolution.

    ``resolution`` <= 0 (or resize=False) feeds the image at its native size
    through the fully-convolutional trunk.
    """
    _, c, h, w = image.data.shape
    if c != 3:
        raise ConfigurationError(f"normalize_input: expected 3 channels, got {c}")
    out = image
    if resize and resolution > 0 and (h, w) != (resolution, resolution):
        out = T.bilinear_resize(out, resolution, resolution)
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    return T.channel_affine(out, 1.0 / std, -mean / std)


def extract_features(
    image: Tensor,
    spec: BackboneSpec,
    weights: dict[str, np.ndarray],
    smooth: bool = False,
    taps: tuple[str, ...] | None = None,
) -> FeatureSet:
    """Run the backbone on a normalized image and capture tap activations.

    Gradients flow back to the image. With ``smooth`` each tap goes through a
    channel softmax before export.
    """
    wanted = spec.taps if taps is None else tuple(taps)
    known = spec.node_names()
    for t in wanted:
        if t not in known:
            raise ConfigurationError(f"unknown tap '{t}' for backbone '{spec.backbone_id}'")

    values: dict[str, Tensor] = {"input": image}
    captured: dict[str, Tensor] = {}
    remaining = set(wanted)
    for node in spec.nodes:
        args = [values[i] for i in node.inputs]
        p = node.params
        if node.op == "conv":
            wt = Tensor(weights[f"{node.name}.weight"])
            bias = None
            if p.get("bias", True):
                oc = p["out_c"]
                bias = Tensor(weights[f"{node.name}.bias"].reshape(1, oc, 1, 1))
            out = T.conv2d(args[0], wt, bias, stride=p.get("stride", 1), padding=p.get("padding", 0))
        elif node.op == "relu":
            out = T.relu(args[0])
        elif node.op == "maxpool":
            out = T.pool2d(args[0], "max", p["k"], p.get("stride", p["k"]))
        elif node.op == "avgpool":
            out = T.pool2d(args[0], "avg", p["k"], p.get("stride", p["k"]))
        elif node.op == "affine":
            out = T.channel_affine(args[0], weights[f"{node.name}.scale"], weights[f"{node.name}.shift"])
        elif node.op == "add":
            out = T.add(args[0], args[1])
        else:
            raise ConfigurationError(f"unknown backbone op '{node.op}'")
        values[node.name] = out
        if node.name in remaining:
            captured[node.name] = out
            remaining.discard(node.name)
            if not remaining:
                break

    ordered = {name: captured[name] for name in wanted}
    if smooth:
        ordered = {name: T.softmax_channels(t) for name, t in ordered.items()}
    return FeatureSet(ordered)


# ---------------------------------------------------------------------------
# backbone definitions


def vgg16_spec() -> BackboneSpec:
    """Truncated VGG16 feature stack through index 15 (the last tap).

    Node names mirror the classic sequential indexing of the conv stack:
    conv/relu/pool entries counted together, taps at the post-ReLU
    indices 11, 13, 15.
    """
    plan = [
        ("features.0", "conv", 3, 64),
        ("features.1", "relu", None, None),
        ("features.2", "conv", 64, 64),
        ("features.3", "relu", None, None),
        ("features.4", "maxpool", None, None),
        ("features.5", "conv", 64, 128),
        ("features.6", "relu", None, None),
        ("features.7", "conv", 128, 128),
        ("features.8", "relu", None, None),
        ("features.9", "maxpool", None, None),
        ("features.10", "conv", 128, 256),
        ("features.11", "relu", None, None),
        ("features.12", "conv", 256, 256),
        ("features.13", "relu", None, None),
        ("features.14", "conv", 256, 256),
        ("features.15", "relu", None, None),
    ]
    nodes = []
    prev = "input"
    for name, op, ic, oc in plan:
        if op == "conv":
            params = {"in_c": ic, "out_c": oc, "k": 3, "stride": 1, "padding": 1, "bias": True}
        elif op == "maxpool":
            params = {"k": 2, "stride": 2}
        else:
            params = {}
        nodes.append(LayerNode(name, op, (prev,), params))
        prev = name
    return BackboneSpec("vgg16", nodes, ("features.11", "features.13", "features.15"))


def _bottleneck(nodes, prefix: str, x: str, in_c: int, planes: int, stride: int) -> str:
    """CLIP-style bottleneck: stride lives in an avg-pool after conv2, and the
    shortcut downsamples with avg-pool + 1x1 conv. Returns the output node."""
    out_c = planes * 4

    def conv(name, inp, ic, oc, k, s=1, p=0):
        nodes.append(
            LayerNode(f"{prefix}.{name}", "conv", (inp,),
                      {"in_c": ic, "out_c": oc, "k": k, "stride": s, "padding": p, "bias": False})
        )
        return f"{prefix}.{name}"

    def affine(name, inp, c):
        nodes.append(LayerNode(f"{prefix}.{name}", "affine", (inp,), {"channels": c}))
        return f"{prefix}.{name}"

    def relu(name, inp):
        nodes.append(LayerNode(f"{prefix}.{name}", "relu", (inp,)))
        return f"{prefix}.{name}"

    h = conv("conv1", x, in_c, planes, 1)
    h = affine("bn1", h, planes)
    h = relu("relu1", h)
    h = conv("conv2", h, planes, planes, 3, 1, 1)
    h = affine("bn2", h, planes)
    h = relu("relu2", h)
    if stride > 1:
        nodes.append(LayerNode(f"{prefix}.pool", "avgpool", (h,), {"k": stride, "stride": stride}))
        h = f"{prefix}.pool"
    h = conv("conv3", h, planes, out_c, 1)
    h = affine("bn3", h, out_c)

    shortcut = x
    if stride > 1 or in_c != out_c:
        if stride > 1:
            nodes.append(
                LayerNode(f"{prefix}.downsample.pool", "avgpool", (shortcut,), {"k": stride, "stride": stride})
            )
            shortcut = f"{prefix}.downsample.pool"
        shortcut = conv("downsample.conv", shortcut, in_c, out_c, 1)
        shortcut = affine("downsample.bn", shortcut, out_c)

    nodes.append(LayerNode(f"{prefix}.add", "add", (h, shortcut)))
    return relu("relu3", f"{prefix}.add")


def clip_resnet50_spec() -> BackboneSpec:
    """CLIP's modified ResNet50 trunk: 3-conv stem, avg-pool downsampling.

    The attention-pool head is omitted; every tap precedes it. Taps are the
    folded second-conv outputs (bn2) of all blocks in stages 3 and 4.
    """
    nodes: list[LayerNode] = []

    def conv(name, inp, ic, oc, k, s=1, p=0):
        nodes.append(LayerNode(name, "conv", (inp,),
                               {"in_c": ic, "out_c": oc, "k": k, "stride": s, "padding": p, "bias": False}))
        return name

    def affine(name, inp, c):
        nodes.append(LayerNode(name, "affine", (inp,), {"channels": c}))
        return name

    def relu(name, inp):
        nodes.append(LayerNode(name, "relu", (inp,)))
        return name

    h = conv("stem.conv1", "input", 3, 32, 3, 2, 1)
    h = affine("stem.bn1", h, 32)
    h = relu("stem.relu1", h)
    h = conv("stem.conv2", h, 32, 32, 3, 1, 1)
    h = affine("stem.bn2", h, 32)
    h = relu("stem.relu2", h)
    h = conv("stem.conv3", h, 32, 64, 3, 1, 1)
    h = affine("stem.bn3", h, 64)
    h = relu("stem.relu3", h)
    nodes.append(LayerNode("stem.pool", "avgpool", (h,), {"k": 2, "stride": 2}))
    h = "stem.pool"

    in_c = 64
    stage_plan = [("layer1", 64, 3, 1), ("layer2", 128, 4, 2), ("layer3", 256, 6, 2), ("layer4", 512, 3, 2)]
    for stage, planes, blocks, stride in stage_plan:
        for b in range(blocks):
            h = _bottleneck(nodes, f"{stage}.{b}", h, in_c, planes, stride if b == 0 else 1)
            in_c = planes * 4

    taps = tuple(f"layer3.{b}.bn2" for b in range(6)) + tuple(f"layer4.{b}.bn2" for b in range(3))
    return BackboneSpec("clip-rn50", nodes, taps)


def toy_spec() -> BackboneSpec:
    """Small 4-channel backbone for weight-free tests and demos.

    Two convs with an average pool between them: the second tap sees an
    ~11 pixel receptive field, enough for coarse pattern statistics.
    """
    nodes = [
        LayerNode("conv1", "conv", ("input",), {"in_c": 3, "out_c": 4, "k": 3, "stride": 1, "padding": 1, "bias": True}),
        LayerNode("relu1", "relu", ("conv1",)),
        LayerNode("pool1", "avgpool", ("relu1",), {"k": 2, "stride": 2}),
        LayerNode("conv2", "conv", ("pool1",), {"in_c": 4, "out_c": 4, "k": 3, "stride": 1, "padding": 1, "bias": True}),
        LayerNode("relu2", "relu", ("conv2",)),
    ]
    return BackboneSpec("toy", nodes, ("relu1", "relu2"))


def toy_archive(seed: int = 0) -> WeightArchive:
    """Deterministic random weights for the toy backbone (no file needed)."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in toy_spec().required_tensors():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(np.float32)
        else:
            tensors[name] = rng.uniform(-0.1, 0.1, shape).astype(np.float32)
    return WeightArchive("toy", (0.5, 0.5, 0.5), (0.5, 0.5, 0.5), 0, tensors)


def toy_filterbank_archive() -> WeightArchive:
    """Deterministic toy weights: per-channel color blurs plus an oriented
    edge filter. Unlike the random init, these make nearest-neighbor
    matching sensitive to pattern scale, which the camera-distance
    experiments rely on."""
    w1 = np.zeros((4, 3, 3, 3), dtype=np.float32)
    w1[0, 0] = 1 / 9.0
    w1[1, 1] = 1 / 9.0
    w1[2, 2] = 1 / 9.0
    sobel = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32) / 8.0
    for c in range(3):
        w1[3, c] = sobel / 3.0
    b1 = np.array([0.0, 0.0, 0.0, 0.5], dtype=np.float32)  # keep signed edges positive
    w2 = np.zeros((4, 4, 3, 3), dtype=np.float32)
    for c in range(4):
        w2[c, c, 1, 1] = 1.0  # identity at half resolution
    tensors = {
        "conv1.weight": w1,
        "conv1.bias": b1,
        "conv2.weight": w2,
        "conv2.bias": np.zeros(4, dtype=np.float32),
    }
    return WeightArchive("toy", (0.5, 0.5, 0.5), (0.5, 0.5, 0.5), 0, tensors)


def build_spec(backbone_id: str) -> BackboneSpec:
    if backbone_id == "vgg16":
        return vgg16_spec()
    if backbone_id == "clip-rn50":
        return clip_resnet50_spec()
    if backbone_id == "toy":
        return toy_spec()
    raise ConfigurationError(f"unknown backbone '{backbone_id}' (expected one of {BACKBONE_IDS})")
