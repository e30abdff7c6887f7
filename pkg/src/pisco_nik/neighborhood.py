"""Kernel geometry and subset partitioning for the consistency systems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvenKernel, TooFewSamples


@dataclass(frozen=True)
class KernelGeometry:
    """Neighbor offsets ``(n_neighbors, 2)`` in normalized k-space units."""

    offsets: np.ndarray
    size: tuple[int, int]
    delta: float

    @property
    def n_neighbors(self) -> int:
        return len(self.offsets)

    @classmethod
    def from_offsets(cls, offsets, delta: float = 1.0) -> "KernelGeometry":
        """Arbitrary offset pattern given in units of ``delta``."""
        offs = np.asarray(offsets, dtype=np.float64).reshape(-1, 2)
        if len(offs) == 0:
            raise ValueError("kernel needs at least one offset")
        if np.any(np.all(offs == 0, axis=1)):
            raise ValueError("kernel may not contain the center offset")
        if len(np.unique(offs, axis=0)) != len(offs):
            raise ValueError("duplicate kernel offsets")
        span = np.abs(offs).max(axis=0).astype(int)
        return cls(offs * delta, (2 * span[0] + 1, 2 * span[1] + 1), float(delta))


@dataclass
class SubsetSystem:
    """One linear system ``T = P W`` built from a contiguous block of rows.

    ``P`` is complex ``(n_rows, n_neighbors * n_coils_in)``, ``T`` is
    ``(n_rows, n_coils_out)``; ``rows`` indexes the block in the source batch.
    """

    P: np.ndarray
    T: np.ndarray
    t_range: tuple[float, float]
    rows: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.P.shape[0]


def kernel_offsets(size=(3, 3), delta: float = 1 / 64) -> KernelGeometry:
    """All grid offsets of an ``h x w`` kernel except the center, row-major."""
    h, w = size
    if h % 2 == 0 or w % 2 == 0 or h < 3 or w < 3:
        raise EvenKernel(f"kernel size must be odd and >= 3, got {size}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    offs = [(i * delta, j * delta)
            for i in range(-(h // 2), h // 2 + 1)
            for j in range(-(w // 2), w // 2 + 1)
            if (i, j) != (0, 0)]
    return KernelGeometry(np.array(offs, dtype=np.float64), (h, w), float(delta))


def build_patches(targets: np.ndarray, kernel: KernelGeometry) -> np.ndarray:
    """Neighbor coordinates ``(M, n_neighbors, 3)``; neighbors keep the target's t."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    out = np.repeat(targets[:, None, :], kernel.n_neighbors, axis=1)
    out[:, :, :2] += kernel.offsets[None]
    return out


def overdetermination(n_neighbors: int, n_coils_in: int, n_coils_out: int, f_od: float):
    """Number of unknowns ``N_w`` and rows per subset ``N_m = ceil(f_od * N_w)``."""
    if f_od <= 1:
        raise ValueError("f_od must exceed 1")
    n_w = n_neighbors * n_coils_in * n_coils_out
    # round first: float noise must not push an integral product (1.1 * 50) up by one
    return n_w, math.ceil(round(f_od * n_w, 9))


def partition_order(t: np.ndarray, mode: str = "temporal", rng=None) -> np.ndarray:
    """Row order used to cut subsets: stable sort by t, or a random permutation."""
    t = np.asarray(t)
    if mode == "temporal":
        return np.argsort(t, kind="stable")
    if mode == "random":
        rng = np.random.default_rng() if rng is None else rng
        return rng.permutation(len(t))
    raise ValueError(f"unknown partition mode {mode!r}")


def subset_blocks(n_rows: int, n_m: int) -> int:
    """Number of full subsets; the trailing remainder is dropped."""
    if n_m < 1:
        raise ValueError("n_m must be >= 1")
    if n_rows < n_m:
        raise TooFewSamples(f"{n_rows} rows cannot fill one subset of {n_m}")
    return n_rows // n_m


def partition_subsets(t, values_T, values_P, n_m: int, mode: str = "temporal", rng=None):
    """Cut rows into consecutive blocks of ``n_m`` after ordering by ``t``."""
    t = np.asarray(t, dtype=np.float64)
    values_T = np.asarray(values_T)
    values_P = np.asarray(values_P)
    if not (len(t) == len(values_T) == len(values_P)):
        raise ValueError("t, values_T and values_P need equal row counts")
    n_s = subset_blocks(len(t), n_m)
    order = partition_order(t, mode, rng)
    out = []
    for s in range(n_s):
        rows = order[s * n_m:(s + 1) * n_m]
        ts = t[rows]
        out.append(SubsetSystem(values_P[rows], values_T[rows], (float(ts.min()), float(ts.max())), rows))
    return out
