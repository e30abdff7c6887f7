"""Calibration-based GRAPPA on Cartesian multi-coil k-space.

k-space arrays are ``(n_coils, nx, ny)``; undersampling removes whole
lines along x (the first spatial axis), and masks are ``(nx, ny)``
booleans.  Kernels reuse :class:`KernelGeometry` with integer grid offsets
(``delta = 1``).  Weights follow ``T = P @ W`` with patch columns ordered
neighbor-major, coil-minor.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import AcsTooSmall, ShapeMismatch
from .neighborhood import KernelGeometry
from .numcore import solve_tikhonov
from .pisco import WeightSet
from .validation import check_is_fitted, check_kspace, check_mask


@dataclass
class CartesianKSpace:
    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.data = check_kspace(self.data)
        self.mask = check_mask(self.mask, self.data.shape[1:])
        self.data = np.where(self.mask[None], self.data, 0)


def _int_offsets(kernel: KernelGeometry) -> np.ndarray:
    steps = kernel.offsets / kernel.delta
    off = np.rint(steps).astype(int)
    if not np.allclose(off, steps):
        raise ValueError("GRAPPA kernels need integer grid offsets")
    return off


def _patch_matrix(data: np.ndarray, offsets: np.ndarray, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    # rows: targets; columns: neighbor-major, coil-minor
    vals = data[:, ix[:, None] + offsets[None, :, 0], iy[:, None] + offsets[None, :, 1]]
    return np.transpose(vals, (1, 2, 0)).reshape(len(ix), -1)


def _interior(shape, offsets: np.ndarray):
    lo = np.maximum(-offsets.min(axis=0), 0)
    hi = np.maximum(offsets.max(axis=0), 0)
    ix, iy = np.meshgrid(np.arange(lo[0], shape[0] - hi[0]), np.arange(lo[1], shape[1] - hi[1]),
                         indexing="ij")
    return ix.ravel(), iy.ravel()


def calibrate(acs, kernel: KernelGeometry, alpha: float = 1e-4) -> WeightSet:
    """Solve for GRAPPA weights on a fully sampled calibration region.

    Every ACS point whose whole patch lies inside the region becomes one
    target row.
    """
    acs = check_kspace(acs.data if isinstance(acs, CartesianKSpace) else acs)
    off = _int_offsets(kernel)
    h = 2 * np.abs(off[:, 0]).max() + 1
    w = 2 * np.abs(off[:, 1]).max() + 1
    if acs.shape[1] < h + 2 or acs.shape[2] < w + 2:
        raise AcsTooSmall(f"ACS region {acs.shape[1:]} smaller than {(h + 2, w + 2)}")
    ix, iy = _interior(acs.shape[1:], off)
    P = _patch_matrix(acs, off, ix, iy)
    T = acs[:, ix, iy].T
    return WeightSet(solve_tikhonov(P, T, alpha), kernel=kernel)


def calibration_residual(acs, weights: WeightSet) -> float:
    """``||P W - T|| / ||T||`` over the calibration targets."""
    acs = check_kspace(acs.data if isinstance(acs, CartesianKSpace) else acs)
    off = _int_offsets(weights.kernel)
    ix, iy = _interior(acs.shape[1:], off)
    P = _patch_matrix(acs, off, ix, iy)
    T = acs[:, ix, iy].T
    return float(np.linalg.norm(P @ weights.W - T) / np.linalg.norm(T))


def apply(weights: WeightSet, undersampled: CartesianKSpace) -> CartesianKSpace:
    """Fill every unsampled location whose full patch is sampled: ``y_T = y_P @ W``.

    Sampled entries are left untouched.  The returned mask marks sampled and
    filled locations.
    """
    if weights.kernel is None:
        raise ValueError("weights carry no kernel geometry")
    off = _int_offsets(weights.kernel)
    data, mask = undersampled.data, undersampled.mask
    n_c = data.shape[0]
    if weights.W.shape != (len(off) * n_c, n_c):
        raise ShapeMismatch(f"weights {weights.W.shape} do not fit {len(off)} neighbors x {n_c} coils")
    ix, iy = _interior(mask.shape, off)
    todo = ~mask[ix, iy]
    ix, iy = ix[todo], iy[todo]
    full = mask[ix[:, None] + off[None, :, 0], iy[:, None] + off[None, :, 1]].all(axis=1)
    ix, iy = ix[full], iy[full]
    out = data.copy()
    new_mask = mask.copy()
    if len(ix):
        out[:, ix, iy] = (_patch_matrix(data, off, ix, iy) @ weights.W).T
        new_mask[ix, iy] = True
    result = CartesianKSpace.__new__(CartesianKSpace)
    result.data, result.mask = out, new_mask
    return result


def line_kernel(gap: int, R: int, width: int = 3) -> KernelGeometry:
    """Kernel for a target ``gap`` lines past a sampled line under R-fold line undersampling.

    Uses the sampled line before (``-gap``) and after (``R - gap``) the target,
    ``width`` columns each.
    """
    if not 0 < gap < R:
        raise ValueError("gap must lie strictly between 0 and R")
    hw = width // 2
    offs = [(dx, dy) for dx in (-gap, R - gap) for dy in range(-hw, hw + 1)]
    return KernelGeometry.from_offsets(offs)


def undersampling_factor(mask: np.ndarray) -> tuple[int, int]:
    """Line spacing ``R`` and phase of the sampled x-lines outside any ACS band."""
    lines = np.flatnonzero(np.asarray(mask).any(axis=1))
    if len(lines) < 2:
        raise ValueError("mask samples fewer than two lines")
    R = 0
    for v in np.diff(lines):
        R = gcd(R, int(v))
    return R, int(lines[0] % R)


class GrappaInterpolator(TransformerMixin, BaseEstimator):
    """GRAPPA for R-fold line undersampling along x.

    One weight set is calibrated per gap position ``1 .. R-1`` between
    sampled lines, each with a ``width``-column kernel spanning the two
    surrounding sampled lines.

    Parameters
    ----------
    R : int
        Line undersampling factor.
    width : int
        Kernel extent along y (odd).
    alpha : float
        Tikhonov weight of the calibration solve.
    """

    def __init__(self, R: int = 2, width: int = 3, alpha: float = 1e-4):
        self.R = R
        self.width = width
        self.alpha = alpha

    def fit(self, X, y=None):
        """``X`` is the fully sampled ACS region ``(n_coils, ax, ay)``."""
        X = check_kspace(X)
        if self.R < 2:
            self.weights_ = []
        else:
            self.weights_ = [calibrate(X, line_kernel(g, self.R, self.width), self.alpha)
                             for g in range(1, self.R)]
        self.n_coils_ = X.shape[0]
        return self

    def transform(self, X, mask=None):
        """Fill ``X`` (``(n_coils, nx, ny)``, zeros where unsampled) given its ``mask``."""
        check_is_fitted(self, "weights_")
        X = check_kspace(X)
        if X.shape[0] != self.n_coils_:
            raise ShapeMismatch(f"fitted on {self.n_coils_} coils, got {X.shape[0]}")
        if mask is None:
            mask = np.abs(X).sum(axis=0) > 0
        ks = CartesianKSpace(X, mask)
        sampled_lines = ks.mask.any(axis=1)
        out = ks.data.copy()
        for gap, ws in enumerate(self.weights_, start=1):
            filled = apply(ws, ks)
            # a line belongs to this gap if the line `gap` before it is sampled
            rows = np.zeros_like(sampled_lines)
            rows[gap:] = sampled_lines[:-gap] & ~sampled_lines[gap:]
            sel = rows[:, None] & filled.mask & ~ks.mask
            out[:, sel] = filled.data[:, sel]
        return out


def grappa_reconstruct(kspace: np.ndarray, mask: np.ndarray, acs_rows: int, alpha: float = 1e-4,
                       width: int = 3) -> np.ndarray:
    """Calibrate on the central ``acs_rows`` x-lines and fill the rest."""
    kspace = check_kspace(kspace)
    mask = check_mask(mask, kspace.shape[1:])
    nx = mask.shape[0]
    lo = nx // 2 - acs_rows // 2
    band = slice(lo, lo + acs_rows)
    if acs_rows < 1 or lo < 0 or not mask[band].all():
        raise AcsTooSmall(f"central {acs_rows} lines are not fully sampled")
    if mask.all():
        return np.where(mask[None], kspace, 0)
    outside = mask.copy()
    outside[band] = False
    R, _ = undersampling_factor(outside if outside.any() else mask)
    est = GrappaInterpolator(R=max(R, 2), width=width, alpha=alpha).fit(kspace[:, band])
    return est.transform(np.where(mask[None], kspace, 0), mask)
