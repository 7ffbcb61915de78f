"""Dense tensors and a recorded tape for reverse-mode differentiation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# Set to True to verify every forward value and gradient is finite.
DEBUG = False


class NumcoreError(Exception):
    pass


class ShapeError(NumcoreError, ValueError):
    pass


class DegenerateMaskError(NumcoreError, ValueError):
    pass


class TapeError(NumcoreError, RuntimeError):
    pass


class NonFiniteError(NumcoreError, FloatingPointError):
    pass


class Tensor:
    """A float64 array that may participate in a recorded computation.

    Leaves (parameters) have ``node_id is None``; tensors produced by a
    recorded op carry the index of their record on the active tape.
    """

    __slots__ = ("value", "requires_grad", "grad", "node_id", "name")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.array(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node_id: Optional[int] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.value

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # Operator sugar; implementations live in ops.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Record:
    op: str
    inputs: tuple
    output: Tensor
    backward: BackwardFn


@dataclass
class Tape:
    """Ordered list of op records; use as a context manager to record."""

    records: list = field(default_factory=list)
    consumed: bool = False

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def push(self, op: str, inputs: tuple, output: Tensor, backward: BackwardFn) -> int:
        if self.consumed:
            raise TapeError("tape already consumed by backward(); call reset() first")
        self.records.append(Record(op, inputs, output, backward))
        return len(self.records) - 1

    def reset(self) -> None:
        self.records.clear()
        self.consumed = False

    def __len__(self) -> int:
        return len(self.records)


_ACTIVE: list = []


def active_tape() -> Optional[Tape]:
    return _ACTIVE[-1] if _ACTIVE else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {what}")


def record(op: str, value: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap ``value`` as the output of ``op`` and record it if any input needs grad."""
    out = Tensor.__new__(Tensor)
    out.value = value
    out.requires_grad = False
    out.grad = None
    out.node_id = None
    out.name = None
    if DEBUG:
        _check_finite(value, f"forward of {op}")
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node_id = tape.push(op, tuple(inputs), out, backward)
    return out


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """Populate ``grad`` on every requires-grad tensor reachable from ``loss``.

    Leaf gradients accumulate (``+=``) so that several losses may be summed
    into one step; intermediate gradients are overwritten.
    """
    tape = tape if tape is not None else active_tape()
    if tape is None:
        raise TapeError("backward() needs a tape")
    if loss.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if tape.consumed:
        raise TapeError("backward() already ran on this tape; call reset() first")
    nid = loss.node_id
    if nid is None or nid >= len(tape.records) or tape.records[nid].output is not loss:
        raise TapeError("loss was not produced by this tape (detached)")

    grads: dict = {nid: np.ones_like(loss.value)}
    for rid in range(nid, -1, -1):
        g = grads.pop(rid, None)
        if g is None:
            continue
        rec = tape.records[rid]
        rec.output.grad = g
        if DEBUG:
            _check_finite(g, f"gradient of {rec.op}")
        for inp, gi in zip(rec.inputs, rec.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp.node_id is None:
                if inp.grad is None:
                    inp.grad = np.array(gi, dtype=np.float64, copy=True)
                else:
                    inp.grad = inp.grad + gi
            elif inp.node_id in grads:
                grads[inp.node_id] = grads[inp.node_id] + gi
            else:
                grads[inp.node_id] = gi
    tape.consumed = True
