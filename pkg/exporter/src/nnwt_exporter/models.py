"""Torch-side model builders for the supported backbones.

VGG16 comes from torchvision, truncated to the feature stack the engine
consumes. The CLIP ResNet50 trunk is reimplemented here with state-dict
keys matching the published CLIP checkpoints (visual.* with the attention
pool dropped), so real checkpoints load directly.
"""

from __future__ import annotations

from collections import OrderedDict

import torch
from torch import nn
import torchvision

VGG_TRUNCATE = 16  # keep features[0:16]: through the relu at index 15


def vgg16_truncated(pretrained: bool = False) -> nn.Sequential:
    weights = torchvision.models.VGG16_Weights.IMAGENET1K_V1 if pretrained else None
    full = torchvision.models.vgg16(weights=weights)
    return nn.Sequential(OrderedDict(
        (str(i), full.features[i]) for i in range(VGG_TRUNCATE)
    ))


class ClipBottleneck(nn.Module):
    """CLIP's anti-aliased bottleneck: stride lives in an avg pool placed
    after conv2, and the shortcut downsamples with avg pool + 1x1 conv."""

    expansion = 4

    def __init__(self, inplanes: int, planes: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(inplanes, planes, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.relu1 = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(planes, planes, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.relu2 = nn.ReLU(inplace=True)
        self.avgpool = nn.AvgPool2d(stride) if stride > 1 else nn.Identity()
        self.conv3 = nn.Conv2d(planes, planes * self.expansion, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(planes * self.expansion)
        self.relu3 = nn.ReLU(inplace=True)

        self.downsample = None
        if stride > 1 or inplanes != planes * self.expansion:
            self.downsample = nn.Sequential(OrderedDict([
                ("-1", nn.AvgPool2d(stride)),
                ("0", nn.Conv2d(inplanes, planes * self.expansion, 1, stride=1, bias=False)),
                ("1", nn.BatchNorm2d(planes * self.expansion)),
            ]))

    def forward(self, x):
        identity = x
        out = self.relu1(self.bn1(self.conv1(x)))
        out = self.relu2(self.bn2(self.conv2(out)))
        out = self.avgpool(out)
        out = self.bn3(self.conv3(out))
        if self.downsample is not None:
            identity = self.downsample(x)
        return self.relu3(out + identity)


class ClipResNet50Trunk(nn.Module):
    """The modified ResNet50 visual trunk (3-conv stem, avg-pool
    downsampling), without the attention pool head."""

    def __init__(self, width: int = 64):
        super().__init__()
        self.conv1 = nn.Conv2d(3, width // 2, 3, stride=2, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(width // 2)
        self.relu1 = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(width // 2, width // 2, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(width // 2)
        self.relu2 = nn.ReLU(inplace=True)
        self.conv3 = nn.Conv2d(width // 2, width, 3, padding=1, bias=False)
        self.bn3 = nn.BatchNorm2d(width)
        self.relu3 = nn.ReLU(inplace=True)
        self.avgpool = nn.AvgPool2d(2)

        self._inplanes = width
        self.layer1 = self._make_layer(width, 3, stride=1)
        self.layer2 = self._make_layer(width * 2, 4, stride=2)
        self.layer3 = self._make_layer(width * 4, 6, stride=2)
        self.layer4 = self._make_layer(width * 8, 3, stride=2)

    def _make_layer(self, planes: int, blocks: int, stride: int) -> nn.Sequential:
        layers = [ClipBottleneck(self._inplanes, planes, stride)]
        self._inplanes = planes * ClipBottleneck.expansion
        for _ in range(1, blocks):
            layers.append(ClipBottleneck(self._inplanes, planes))
        return nn.Sequential(*layers)

    def forward(self, x):
        x = self.relu1(self.bn1(self.conv1(x)))
        x = self.relu2(self.bn2(self.conv2(x)))
        x = self.relu3(self.bn3(self.conv3(x)))
        x = self.avgpool(x)
        x = self.layer1(x)
        x = self.layer2(x)
        x = self.layer3(x)
        return self.layer4(x)

    def load_clip_state_dict(self, state: dict) -> None:
        """Accept a full CLIP checkpoint (visual.*) or a bare trunk dict;
        the attention pool and text tower are dropped."""
        skip = ("attnpool", "transformer", "token_embedding", "positional_embedding",
                "ln_final", "text_projection", "logit_scale")
        trunk = {}
        for key, value in state.items():
            if key.startswith("visual."):
                key = key[len("visual."):]
            if key.startswith(skip):
                continue
            trunk[key] = value
        missing, _ = self.load_state_dict(trunk, strict=False)
        missing = [m for m in missing if "num_batches_tracked" not in m]
        if missing:
            raise KeyError(f"checkpoint missing trunk tensors: {missing[:5]}")


def seeded_init(model: nn.Module, seed: int) -> nn.Module:
    """Deterministic non-degenerate weights: default conv init plus gentle
    batch-norm statistics so activations stay well-scaled through depth."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_normal_(module.weight, generator=gen)
                if module.bias is not None:
                    module.bias.uniform_(-0.1, 0.1, generator=gen)
            elif isinstance(module, nn.BatchNorm2d):
                module.weight.uniform_(0.8, 1.2, generator=gen)
                module.bias.normal_(0.0, 0.05, generator=gen)
                module.running_mean.normal_(0.0, 0.02, generator=gen)
                module.running_var.uniform_(0.9, 1.1, generator=gen)
    return model
