"""Inference on Cartesian grids, coil combination, INUFFT baselines and metrics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatch
from .kspace import KSampleSet, bin_by_navigator, cartesian_coords, nudft_adjoint

log = logging.getLogger(__name__)

PSNR_CAP = 99.0


@dataclass
class FrameStack:
    """``(n_frames, nx, ny)`` images with their navigator values ``t`` (ascending)."""

    frames: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.frames.ndim != 3 or len(self.t) != len(self.frames):
            raise ShapeMismatch(f"{self.frames.shape} frames with {len(self.t)} time points")

    def __len__(self) -> int:
        return len(self.frames)


def frame_times(n_frames: int) -> np.ndarray:
    """``t_j = 0.5 j / (n - 1)``; a single frame sits at ``t = 0``."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    if n_frames == 1:
        return np.zeros(1)
    return 0.5 * np.arange(n_frames) / (n_frames - 1)


def infer_grid(model, t: float, shape: tuple[int, int]) -> np.ndarray:
    """Query the model on the full Cartesian grid at time ``t``: ``(n_coils, nx, ny)``."""
    kc = cartesian_coords(shape).reshape(-1, 2)
    coords = np.concatenate([kc, np.full((len(kc), 1), float(t))], axis=1)
    y = model.predict(coords)
    return y.T.reshape((y.shape[1],) + tuple(shape))


def kspace_to_image(kspace: np.ndarray) -> np.ndarray:
    """Inverse of the centered DFT used by ``nudft_forward`` on its Cartesian grid."""
    k = np.fft.ifftshift(kspace, axes=(-2, -1))
    return np.fft.fftshift(np.fft.ifft2(k, axes=(-2, -1)), axes=(-2, -1))


def image_to_kspace(image: np.ndarray) -> np.ndarray:
    x = np.fft.ifftshift(image, axes=(-2, -1))
    return np.fft.fftshift(np.fft.fft2(x, axes=(-2, -1)), axes=(-2, -1))


def coil_combine(coil_images: np.ndarray, maps: np.ndarray, threshold: float = 1e-8) -> np.ndarray:
    """``sum_c conj(s_c) x_c / sum_c |s_c|^2``; pixels with ``sum |s_c|^2 <= threshold`` become 0."""
    coil_images = np.asarray(coil_images)
    maps = np.asarray(maps)
    if coil_images.shape != maps.shape:
        raise ShapeMismatch(f"coil images {coil_images.shape} vs maps {maps.shape}")
    norm = np.sum(np.abs(maps) ** 2, axis=0)
    num = np.sum(np.conj(maps) * coil_images, axis=0)
    out = np.zeros_like(num)
    ok = norm > threshold
    out[ok] = num[ok] / norm[ok]
    return out


def reconstruct_frames(model, maps: np.ndarray, t_values) -> FrameStack:
    """Complex coil-combined images of the model at each ``t``."""
    shape = maps.shape[1:]
    frames = [coil_combine(kspace_to_image(infer_grid(model, t, shape)), maps) for t in t_values]
    return FrameStack(np.stack(frames), np.asarray(t_values))


def radial_density(coords: np.ndarray, n_fe: int, dc_weight: float | None = None) -> np.ndarray:
    """Ramp ``|k|`` with a finite weight at the center.

    Every spoke samples ``k = 0``, so each center sample only owns its share
    of the disk of radius ``1 / (2 n_fe)``: ``dc_weight`` defaults to
    ``1 / (4 n_fe)``, which keeps the DC term at its true area.
    """
    r = np.hypot(coords[:, 0], coords[:, 1])
    w0 = 1.0 / (4 * n_fe) if dc_weight is None else float(dc_weight)
    return np.where(r > 0, r, w0)


def inufft_recon(samples: KSampleSet, maps: np.ndarray, n_states: int, n_fe: int,
                 dc_weight: float | None = None) -> FrameStack:
    """Density-compensated adjoint NUDFT per motion state, coil-combined.

    Each bin is scaled by ``pi / (n_fe * n_spokes_in_bin)``, the area element
    of the radial sampling, so the result approximates the image itself.
    Empty bins give zero frames.
    """
    shape = maps.shape[1:]
    frames, centers = [], []
    for b, part in enumerate(bin_by_navigator(samples, n_states)):
        centers.append(0.5 * (b + 0.5) / n_states)
        if len(part) == 0:
            log.warning("motion state %d of %d is empty; zero-filled", b, n_states)
            frames.append(np.zeros(shape, dtype=np.complex128))
            continue
        n_spokes = len(np.unique(part.spoke))
        w = radial_density(part.coords, n_fe, dc_weight) * np.pi / (n_fe * n_spokes)
        coil_imgs = nudft_adjoint((part.values * w[:, None]).T, part.coords[:, :2], shape)
        frames.append(coil_combine(coil_imgs, maps))
    return FrameStack(np.stack(frames), np.array(centers))


# -- metrics -------------------------------------------------------------

def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """``10 log10(max(ref)^2 / MSE)`` in dB, capped at 99."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeMismatch(f"{ref.shape} vs {test.shape}")
    peak = ref.max()
    if peak <= 0:
        raise ValueError("reference must have a positive maximum")
    mse = np.mean((ref - test) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10 * np.log10(peak**2 / mse)))


def ssim(ref: np.ndarray, test: np.ndarray, win: int = 8) -> float:
    """Mean SSIM over all ``win x win`` windows (uniform weights, population moments).

    Stabilizers are ``C1 = (0.01 L)^2`` and ``C2 = (0.03 L)^2`` with ``L = max(ref)``.
    """
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeMismatch(f"{ref.shape} vs {test.shape}")
    if ref.ndim != 2 or min(ref.shape) < win:
        raise ShapeMismatch(f"SSIM needs 2-D images of at least {win}x{win}, got {ref.shape}")
    L = ref.max()
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    a = sliding_window_view(ref, (win, win))
    b = sliding_window_view(test, (win, win))
    mu_a = a.mean(axis=(-2, -1))
    mu_b = b.mean(axis=(-2, -1))
    var_a = a.var(axis=(-2, -1))
    var_b = b.var(axis=(-2, -1))
    cov = (a * b).mean(axis=(-2, -1)) - mu_a * mu_b
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
    return float(s.mean())


@dataclass
class MetricReport:
    """Rows of ``(metric, frame, value)``; ``frame`` is an index or an aggregate name."""

    rows: list[tuple[str, str, float]] = field(default_factory=list)

    def values(self, metric: str) -> np.ndarray:
        return np.array([v for m, f, v in self.rows if m == metric and f.isdigit()])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "frame", "value"])
            for m, f, v in self.rows:
                w.writerow([m, f, repr(float(v))])


def yt_columns(nx: int, n: int) -> np.ndarray:
    """``n`` x-positions evenly spread over the central half of the image."""
    return np.linspace(nx // 4, 3 * nx // 4 - 1, n).round().astype(int)


def evaluate(ref: np.ndarray, test: np.ndarray) -> MetricReport:
    """Per-frame PSNR and SSIM on magnitudes, plus SSIM of yt-slices.

    yt-slices fix one x column and stack that column over frames; one slice
    is scored for each of ``n_frames`` columns from :func:`yt_columns`.
    Mean and median rows follow per metric.
    """
    ref = np.abs(np.asarray(ref))
    test = np.abs(np.asarray(test))
    if ref.shape != test.shape or ref.ndim != 3:
        raise ShapeMismatch(f"frame stacks differ: {ref.shape} vs {test.shape}")
    n = len(ref)
    report = MetricReport()
    for j in range(n):
        report.rows.append(("psnr", str(j), psnr(ref[j], test[j])))
    for j in range(n):
        report.rows.append(("ssim", str(j), ssim(ref[j], test[j])))
    win = min(8, n)
    for j, x in enumerate(yt_columns(ref.shape[1], n)):
        report.rows.append(("ssim_yt", str(j), ssim(ref[:, x, :], test[:, x, :], win=win)))
    for metric in ("psnr", "ssim", "ssim_yt"):
        v = report.values(metric)
        report.rows.append((metric, "mean", float(np.mean(v))))
        report.rows.append((metric, "median", float(np.median(v))))
    return report


def write_pgm(path, image: np.ndarray, vmax: float | None = None) -> None:
    """Binary 8-bit PGM (P5) of ``|image|`` scaled to ``vmax`` (default: its maximum)."""
    mag = np.abs(np.asarray(image, dtype=np.complex128))
    vmax = float(mag.max()) if vmax is None else float(vmax)
    scaled = np.zeros(mag.shape) if vmax <= 0 else np.clip(mag / vmax, 0, 1)
    # rows of the file are y, columns x
    pix = np.round(255 * scaled.T).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())
