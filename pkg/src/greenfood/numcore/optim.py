from __future__ import annotations

from typing import Mapping

import numpy as np

from .tensor import NumcoreError, Tensor


class TrainingInvariantError(NumcoreError, RuntimeError):
    pass


class Adam:
    """Adam with an L2 term folded into the gradient before the moments.

    Only tensors with ``requires_grad`` are updated; every such tensor must
    have a gradient when :meth:`step` runs. Gradients are cleared afterwards.
    """

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        l2: float = 0.0,
        betas: tuple = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = {k: p for k, p in params.items() if p.requires_grad}
        self.lr = float(lr)
        self.l2 = float(l2)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.value) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in self.params.items()}

    def step(self) -> None:
        missing = [k for k, p in self.params.items() if p.grad is None]
        if missing:
            raise TrainingInvariantError(f"no gradient for trainable parameters: {missing}")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for k, p in self.params.items():
            g = p.grad + self.l2 * p.value if self.l2 else p.grad
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
