from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .tensor import Tape, Tensor, backward

MAX_CHECK_PARAMS = 10_000


@dataclass
class GradCheckReport:
    errors: dict
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e < self.tolerance for e in self.errors.values())

    @property
    def worst(self) -> float:
        return max(self.errors.values(), default=0.0)

    def lines(self) -> list:
        return [f"{name}: rel_err={err:.3e} {'ok' if err < self.tolerance else 'FAIL'}"
                for name, err in self.errors.items()]


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    tolerance: float = 1e-4,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare tape gradients with central finite differences.

    ``loss_fn`` must rebuild the scalar loss from the current parameter
    values on every call. The error for a block is
    ``max|analytic - numeric| / max(max|analytic|, max|numeric|)``, i.e.
    relative to the block's gradient scale, so tiny entries do not blow up
    on finite-difference noise.
    """
    total = sum(p.size for p in params.values())
    if total > MAX_CHECK_PARAMS:
        raise ValueError(f"grad_check is limited to {MAX_CHECK_PARAMS} parameters, got {total}")
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    analytic = {k: (p.grad if p.grad is not None else np.zeros_like(p.value)).copy()
                for k, p in params.items()}
    for p in params.values():
        p.grad = None

    errors = {}
    for name, p in params.items():
        numeric = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        out = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().value)
            flat[i] = orig - h
            down = float(loss_fn().value)
            flat[i] = orig
            out[i] = (up - down) / (2.0 * h)
        a = analytic[name]
        scale = max(np.abs(a).max(initial=0.0), np.abs(numeric).max(initial=0.0))
        diff = np.abs(a - numeric).max(initial=0.0)
        errors[name] = 0.0 if scale == 0.0 else float(diff / scale)
    return GradCheckReport(errors, tolerance)
