"""Moving-ellipse phantom, respiratory navigator and coil sensitivity maps.

Image coordinates are normalized: pixel ``i`` of an axis of length ``N``
sits at ``(i - N/2) / N``, so the field of view spans ``[-0.5, 0.5)``.
The first array axis is x, the second y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Ellipse:
    """One ellipse of the phantom.

    ``kappa`` is the displacement of the center along y per unit of
    navigator value, in normalized units.
    """

    x0: float
    y0: float
    a: float
    b: float
    angle: float = 0.0
    amplitude: complex = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        if abs(self.amplitude) > 10:
            raise ValueError("ellipse amplitude magnitude must be <= 10")

    def mask(self, x: np.ndarray, y: np.ndarray, t: float = 0.0) -> np.ndarray:
        dx = x - self.x0
        dy = y - (self.y0 + self.kappa * t)
        c, s = np.cos(self.angle), np.sin(self.angle)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0


def default_ellipses() -> list[Ellipse]:
    """Abdomen-like scene: body outline, a moving liver and kidneys, static vessels."""
    return [
        Ellipse(0.0, 0.0, 0.42, 0.32, 0.0, 0.5, 0.0),
        Ellipse(-0.12, -0.08, 0.16, 0.12, 0.3, 0.4 + 0.1j, 0.12),
        Ellipse(0.14, -0.05, 0.08, 0.10, -0.2, 0.3, 0.10),
        Ellipse(0.05, 0.16, 0.05, 0.04, 0.0, 0.6, 0.06),
        Ellipse(-0.02, 0.02, 0.025, 0.025, 0.0, 0.8, 0.0),
        Ellipse(0.25, 0.1, 0.04, 0.06, 0.5, 0.35 - 0.1j, 0.08),
    ]


@dataclass
class DynamicPhantom:
    ellipses: list[Ellipse] = field(default_factory=default_ellipses)
    shape: tuple[int, int] = (64, 64)

    def __post_init__(self):
        nx, ny = self.shape
        if nx < 8 or ny < 8 or nx % 2 or ny % 2:
            raise ValueError(f"grid must be even and >= 8, got {self.shape}")

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        return image_grid(self.shape)

    def render(self, t: float = 0.0) -> np.ndarray:
        return render_frame(self, t)


def image_grid(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Normalized pixel-center coordinates, each of shape ``shape``."""
    nx, ny = shape
    x = (np.arange(nx) - nx // 2) / nx
    y = (np.arange(ny) - ny // 2) / ny
    return np.meshgrid(x, y, indexing="ij")


def render_frame(phantom: DynamicPhantom, t: float) -> np.ndarray:
    """Complex image at navigator value ``t``: sum of covering ellipse amplitudes."""
    x, y = phantom.grid()
    img = np.zeros(phantom.shape, dtype=np.complex128)
    for e in phantom.ellipses:
        img[e.mask(x, y, t)] += e.amplitude
    return img


def support_mask(phantom: DynamicPhantom, ts=(0.0, 0.5)) -> np.ndarray:
    """Pixels covered by any ellipse at any of the navigator values ``ts``."""
    x, y = phantom.grid()
    out = np.zeros(phantom.shape, dtype=bool)
    for t in ts:
        for e in phantom.ellipses:
            out |= e.mask(x, y, t)
    return out


def navigator_signal(n_spokes: int, period: float) -> np.ndarray:
    """Synthetic breathing signal in ``[0, 0.5]``, one value per spoke.

    ``t_i = 0.25 * (1 - cos(2 pi i / period))``.  There is no drift, so drift
    correction is a no-op.
    """
    if n_spokes < 1:
        raise ValueError("n_spokes must be >= 1")
    if period < 2:
        raise ValueError("period must be >= 2 spokes")
    i = np.arange(n_spokes)
    return np.clip(0.25 * (1.0 - np.cos(2.0 * np.pi * i / period)), 0.0, 0.5)


def coil_maps(
    n_coils: int,
    shape: tuple[int, int],
    *,
    width: float = 0.3,
    radius: float = 0.4,
    ramp: float = 1.0,
    seed: int | None = None,
) -> np.ndarray:
    """Smooth complex sensitivities, shape ``(n_coils, nx, ny)``.

    Coil ``c`` has a Gaussian magnitude of std ``width`` centered on the
    ``c``-th of ``n_coils`` points evenly spaced on a circle of ``radius``,
    times a linear phase ramp of ``ramp`` cycles/FOV pointing along the coil
    direction (``ramp`` is clipped to 2).  A ``seed`` adds a random constant
    phase per coil.
    """
    if n_coils < 1:
        raise ValueError("n_coils must be >= 1")
    ramp = min(abs(ramp), 2.0)
    x, y = image_grid(shape)
    phi = 2 * np.pi * np.arange(n_coils) / n_coils
    offsets = np.zeros(n_coils)
    if seed is not None:
        offsets = np.random.default_rng(seed).uniform(0, 2 * np.pi, n_coils)
    maps = np.empty((n_coils,) + tuple(shape), dtype=np.complex128)
    for c in range(n_coils):
        if n_coils == 1:
            cx = cy = 0.0
        else:
            cx, cy = radius * np.cos(phi[c]), radius * np.sin(phi[c])
        mag = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2))
        u, v = ramp * np.cos(phi[c]), ramp * np.sin(phi[c])
        # x, y are normalized, so u cycles/FOV gives phase 2 pi u x
        maps[c] = mag * np.exp(1j * (2 * np.pi * (u * x + v * y) + offsets[c]))
    return maps
