"""Adam updates for texture parameters."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    def __init__(self, param: Tensor, lr: float = 1e-2, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.param = param
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros_like(param.data, dtype=np.float32)
        self.v = np.zeros_like(param.data, dtype=np.float32)

    def step(self) -> float:
        """Apply one update from param.grad (treated as zero when absent).
        Returns the L2 norm of the applied delta."""
        g = self.param.grad
        if g is None:
            g = np.zeros_like(self.param.data)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (g * g)
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        delta = self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        self.param.update_data(self.param.data - delta)
        return float(np.linalg.norm(delta))
