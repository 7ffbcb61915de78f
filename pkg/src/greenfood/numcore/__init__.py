"""Small float64 tensor engine with tape-based reverse-mode autodiff."""
from . import ops
from .gradcheck import GradCheckReport, grad_check
from .optim import Adam, TrainingInvariantError
from .tensor import (
    DegenerateMaskError,
    NonFiniteError,
    NumcoreError,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    active_tape,
    backward,
)

__all__ = [
    "Adam",
    "DegenerateMaskError",
    "GradCheckReport",
    "NonFiniteError",
    "NumcoreError",
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "TrainingInvariantError",
    "active_tape",
    "backward",
    "grad_check",
    "ops",
]
