"""Radial trajectories, exact non-uniform DFT and acquisition simulation.

k-space coordinates are normalized to cycles per pixel, so a grid of ``N``
pixels is Nyquist-sampled at spacing ``1/N`` over ``[-0.5, 0.5)``.
Image positions are integer pixel offsets ``r in {-N/2, ..., N/2 - 1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .phantom import DynamicPhantom, render_frame

GOLDEN_RATIO = (1 + np.sqrt(5)) / 2
GOLDEN_ANGLE = np.pi / GOLDEN_RATIO

_CHUNK = 4096


@dataclass
class Trajectory:
    angles: np.ndarray
    n_fe: int

    @property
    def n_spokes(self) -> int:
        return len(self.angles)

    @property
    def radii(self) -> np.ndarray:
        return (np.arange(self.n_fe) - self.n_fe // 2) / self.n_fe

    @property
    def coords(self) -> np.ndarray:
        """``(n_spokes, n_fe, 2)`` array of (k_x, k_y)."""
        r = self.radii
        return np.stack([np.cos(self.angles)[:, None] * r, np.sin(self.angles)[:, None] * r], axis=-1)


@dataclass
class KSampleSet:
    """Multi-coil samples at spatio-temporal coordinates.

    ``coords`` is ``(M, 3)`` holding (k_x, k_y, t); ``values`` is ``(M, n_coils)``
    complex; ``spoke`` gives the acquisition index of each sample's spoke.
    """

    coords: np.ndarray
    values: np.ndarray
    spoke: np.ndarray = field(default=None)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if len(self.coords) != len(self.values):
            raise DimensionMismatch(f"{len(self.coords)} coords but {len(self.values)} values")
        if self.spoke is None:
            self.spoke = np.zeros(len(self.coords), dtype=np.int64)
        self.spoke = np.asarray(self.spoke, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def n_coils(self) -> int:
        return self.values.shape[1]

    def subset(self, index) -> "KSampleSet":
        return KSampleSet(self.coords[index], self.values[index], self.spoke[index])


def golden_angle_radial(n_spokes: int, n_fe: int) -> Trajectory:
    """Spoke ``n`` at angle ``mod(n * pi / phi, pi)``; readouts cross k = 0 at index ``n_fe/2``."""
    if n_fe < 8 or n_fe % 2:
        raise ValueError("n_fe must be even and >= 8")
    return Trajectory(np.mod(np.arange(n_spokes) * GOLDEN_ANGLE, np.pi), n_fe)


def cartesian_coords(shape: tuple[int, int]) -> np.ndarray:
    """Nyquist grid as ``(nx, ny, 2)`` normalized coordinates, DC at index ``N/2``."""
    nx, ny = shape
    kx = (np.arange(nx) - nx // 2) / nx
    ky = (np.arange(ny) - ny // 2) / ny
    return np.stack(np.meshgrid(kx, ky, indexing="ij"), axis=-1)


def _pixel_positions(n: int) -> np.ndarray:
    return np.arange(n) - n // 2


def _phasors(coords: np.ndarray, shape, sign: float):
    ex = np.exp(sign * 2j * np.pi * np.outer(coords[:, 0], _pixel_positions(shape[0])))
    ey = np.exp(sign * 2j * np.pi * np.outer(coords[:, 1], _pixel_positions(shape[1])))
    return ex, ey


def nudft_forward(image: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Exact ``y(k) = sum_r x(r) exp(-2 pi i k.r)``.

    ``image`` is ``(nx, ny)`` or a stack ``(..., nx, ny)``; ``coords`` is
    ``(M, 2)`` (extra columns are ignored).  The exponential separates over
    x and y, so each sample costs ``O(nx * ny)`` multiply-adds but only
    ``nx + ny`` complex exponentials.
    """
    image = np.asarray(image, dtype=np.complex128)
    coords = np.asarray(coords, dtype=np.float64)
    if image.ndim < 2:
        raise DimensionMismatch("image must be at least 2-D")
    if coords.ndim != 2 or coords.shape[1] < 2:
        raise DimensionMismatch(f"coords must be (M, 2), got {coords.shape}")
    shape = image.shape[-2:]
    out = np.empty(image.shape[:-2] + (len(coords),), dtype=np.complex128)
    for s in range(0, len(coords), _CHUNK):
        ex, ey = _phasors(coords[s:s + _CHUNK], shape, -1.0)
        # (M, nx) @ (..., nx, ny) -> (..., M, ny)
        out[..., s:s + _CHUNK] = np.sum((ex @ image) * ey, axis=-1)
    return out


def nudft_adjoint(samples: np.ndarray, coords: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Exact adjoint ``x(r) = sum_m y_m exp(+2 pi i k_m.r)``.

    ``samples`` is ``(M,)`` or ``(..., M)``; returns ``(..., nx, ny)``.
    """
    samples = np.asarray(samples, dtype=np.complex128)
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] < 2:
        raise DimensionMismatch(f"coords must be (M, 2), got {coords.shape}")
    if samples.shape[-1] != len(coords):
        raise DimensionMismatch(f"{samples.shape[-1]} samples but {len(coords)} coords")
    out = np.zeros(samples.shape[:-1] + tuple(shape), dtype=np.complex128)
    for s in range(0, len(coords), _CHUNK):
        ex, ey = _phasors(coords[s:s + _CHUNK], shape, 1.0)
        # sum_m ex[m, rx] * y[m] * ey[m, ry]
        out += np.swapaxes(ex, 0, 1) @ (samples[..., s:s + _CHUNK, None] * ey)
    return out


def simulate_acquisition(
    phantom: DynamicPhantom,
    maps: np.ndarray,
    traj: Trajectory,
    nav: np.ndarray,
) -> KSampleSet:
    """Motion-affected multi-coil acquisition, one frame per spoke.

    Spoke ``i`` samples the phantom rendered at ``nav[i]``, weighted by each
    coil map.  Output rows are ordered spoke by spoke.
    """
    nav = np.asarray(nav, dtype=np.float64)
    if len(nav) != traj.n_spokes:
        raise DimensionMismatch(f"{len(nav)} navigator values for {traj.n_spokes} spokes")
    if maps.shape[1:] != phantom.shape:
        raise DimensionMismatch(f"maps {maps.shape} do not match phantom grid {phantom.shape}")
    kc = traj.coords
    n_fe = traj.n_fe
    values = np.empty((traj.n_spokes * n_fe, len(maps)), dtype=np.complex128)
    cache: dict[float, np.ndarray] = {}
    for i, t in enumerate(nav):
        key = float(t)
        if key not in cache:
            cache.clear()
            cache[key] = maps * render_frame(phantom, key)
        values[i * n_fe:(i + 1) * n_fe] = nudft_forward(cache[key], kc[i]).T
    coords = np.concatenate(
        [kc.reshape(-1, 2), np.repeat(nav, n_fe)[:, None]], axis=1)
    spoke = np.repeat(np.arange(traj.n_spokes), n_fe)
    return KSampleSet(coords, values, spoke)


def accelerate(samples: KSampleSet, R: int) -> KSampleSet:
    """Keep spokes whose index is a multiple of ``R``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    if R == 1:
        return samples
    return samples.subset(samples.spoke % R == 0)


def bin_by_navigator(samples: KSampleSet, n_states: int) -> list[KSampleSet]:
    """Split samples into ``n_states`` equal-width bins of ``t`` over ``[0, 0.5]``."""
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    idx = bin_index(samples.coords[:, 2], n_states)
    return [samples.subset(idx == b) for b in range(n_states)]


def bin_index(t: np.ndarray, n_states: int) -> np.ndarray:
    idx = np.floor(np.asarray(t) / (0.5 / n_states)).astype(np.int64)
    return np.clip(idx, 0, n_states - 1)
