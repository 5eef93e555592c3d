from .autograd import ShapeError, Tape, Tensor, backward, default_dtype, no_record, precision
from .optim import AdamW, AdamWState, NonFiniteGradientError, adamw_step
from . import nn, ops

__all__ = [
    "AdamW",
    "AdamWState",
    "NonFiniteGradientError",
    "ShapeError",
    "Tape",
    "Tensor",
    "adamw_step",
    "backward",
    "default_dtype",
    "nn",
    "no_record",
    "ops",
    "precision",
]
