"""Reverse-mode autodiff tape and complex least-squares primitives."""

from .autodiff import EPS_ABS, Tape, Tensor, smooth_abs
from .linalg import (
    from_channels,
    solve_tikhonov,
    solve_tikhonov_grad,
    tikhonov_op,
    to_channels,
)

__all__ = [
    "EPS_ABS",
    "Tape",
    "Tensor",
    "smooth_abs",
    "from_channels",
    "to_channels",
    "solve_tikhonov",
    "solve_tikhonov_grad",
    "tikhonov_op",
]
