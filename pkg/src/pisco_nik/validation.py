"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .errors import DimensionMismatch, ShapeMismatch

__all__ = ["check_coords", "check_kspace", "check_mask", "check_samples", "check_is_fitted"]


def check_coords(coords, name: str = "coords") -> np.ndarray:
    """``(M, 3)`` finite float64 array of (k_x, k_y, t)."""
    c = np.asarray(coords, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 3:
        raise DimensionMismatch(f"{name} must be (M, 3), got {c.shape}")
    if not np.isfinite(c).all():
        raise ValueError(f"{name} contains non-finite values")
    return c


def check_samples(values, n_rows: int | None = None) -> np.ndarray:
    """``(M, n_coils)`` finite complex128 array."""
    v = np.asarray(values, dtype=np.complex128)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise DimensionMismatch(f"samples must be (M, n_coils), got {v.shape}")
    if n_rows is not None and len(v) != n_rows:
        raise DimensionMismatch(f"{len(v)} samples for {n_rows} coordinates")
    if not np.isfinite(v).all():
        raise ValueError("samples contain non-finite values")
    return v


def check_kspace(kspace) -> np.ndarray:
    """``(n_coils, nx, ny)`` complex128 array; a 2-D input is treated as one coil."""
    k = np.asarray(kspace, dtype=np.complex128)
    if k.ndim == 2:
        k = k[None]
    if k.ndim != 3:
        raise DimensionMismatch(f"k-space must be (n_coils, nx, ny), got {k.shape}")
    return k


def check_mask(mask, shape) -> np.ndarray:
    m = np.asarray(mask)
    if m.shape != tuple(shape):
        raise ShapeMismatch(f"mask {m.shape} does not match grid {tuple(shape)}")
    return m.astype(bool)
