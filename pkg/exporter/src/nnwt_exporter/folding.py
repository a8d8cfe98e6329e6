"""Batch-norm folding: inference-mode BN as a per-channel affine."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


def fold_batchnorm(bn: nn.BatchNorm2d) -> tuple[np.ndarray, np.ndarray]:
    """scale = gamma / sqrt(var + eps); shift = beta - mean * scale."""
    with torch.no_grad():
        var = bn.running_var.double()
        scale = bn.weight.double() / torch.sqrt(var + bn.eps)
        shift = bn.bias.double() - bn.running_mean.double() * scale
    return (
        scale.float().numpy().copy(),
        shift.float().numpy().copy(),
    )


class FoldedAffine(nn.Module):
    """Per-channel y = x * scale + shift, for zoo-side folding checks."""

    def __init__(self, scale: np.ndarray, shift: np.ndarray):
        super().__init__()
        self.register_buffer("scale", torch.from_numpy(scale).reshape(1, -1, 1, 1))
        self.register_buffer("shift", torch.from_numpy(shift).reshape(1, -1, 1, 1))

    def forward(self, x):
        return x * self.scale + self.shift
