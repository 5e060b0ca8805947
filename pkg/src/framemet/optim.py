"""Adaptive-moment (Adam) parameter updates with bias correction."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import Tensor
from .errors import UsageError


class Adam:
    """Holds per-parameter moment buffers and applies bias-corrected updates.

    ``step()`` consumes the accumulated gradients and zeroes them afterwards,
    so a fresh backward pass is required before the next step.
    """

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        for p in self.params:
            if not p.requires_grad or p.grad is None:
                raise UsageError("Adam received a parameter without a gradient buffer")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            g[...] = 0.0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad[...] = 0.0
