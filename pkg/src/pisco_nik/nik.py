"""Coordinate network mapping (k_x, k_y, t) to multi-coil complex k-space.

Coordinates go through a frozen Gaussian Fourier-feature encoding, then a
stack of sine-activated layers and a final linear layer whose ``2 * n_coils``
outputs are read as (real, imag) pairs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch
from .ndarray_io import read_nda, write_nda
from .numcore import Tape, Tensor

_CHUNK = 8192


@dataclass
class FeatureEncoding:
    """``[sin(2 pi c B^T), cos(2 pi c B^T)]`` with ``B`` drawn once per seed."""

    B: np.ndarray

    @classmethod
    def create(cls, n_freq: int = 128, sigma_k: float = 32.0, sigma_t: float = 4.0, seed: int = 0):
        rng = np.random.default_rng([seed, 0xE1C])
        scales = np.array([sigma_k, sigma_k, sigma_t])
        return cls(rng.standard_normal((n_freq, 3)) * scales)

    @property
    def n_features(self) -> int:
        return 2 * len(self.B)

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        return encode(coords, self.B)


def encode(coords: np.ndarray, B: np.ndarray) -> np.ndarray:
    phase = 2 * np.pi * (np.asarray(coords, dtype=np.float64) @ B.T)
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)


@dataclass
class SirenModel:
    """Parameters of the sine network.

    ``weights[l]`` is ``(fan_in, fan_out)`` and is applied as ``x @ W + b``.
    """

    encoding: FeatureEncoding
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    omega0: float = 30.0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_coils(self) -> int:
        return self.weights[-1].shape[1] // 2

    @property
    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params) -> None:
        params = list(params)
        self.weights = [np.asarray(p, dtype=np.float64) for p in params[0::2]]
        self.biases = [np.asarray(p, dtype=np.float64) for p in params[1::2]]

    def copy(self) -> "SirenModel":
        return SirenModel(FeatureEncoding(self.encoding.B.copy()),
                          [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                          self.omega0, self.seed, dict(self.meta))

    def predict(self, coords: np.ndarray) -> np.ndarray:
        """Complex ``(M, n_coils)`` output without recording a tape."""
        coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
        out = np.empty((len(coords), self.n_coils), dtype=np.complex128)
        for s in range(0, len(coords), _CHUNK):
            h = self.encoding(coords[s:s + _CHUNK])
            for w, b in zip(self.weights[:-1], self.biases[:-1]):
                h = np.sin(self.omega0 * (h @ w + b))
            y = h @ self.weights[-1] + self.biases[-1]
            out[s:s + _CHUNK] = y[:, 0::2] + 1j * y[:, 1::2]
        return out


def build_model(
    n_coils: int,
    *,
    hidden: int = 512,
    layers: int = 4,
    omega0: float = 30.0,
    n_freq: int = 128,
    sigma_k: float = 32.0,
    sigma_t: float = 4.0,
    seed: int = 0,
) -> SirenModel:
    """Encoding -> ``layers`` sine layers of width ``hidden`` -> linear ``2 * n_coils``."""
    enc = FeatureEncoding.create(n_freq, sigma_k, sigma_t, seed)
    dims = [enc.n_features] + [hidden] * layers + [2 * n_coils]
    model = SirenModel(enc, [np.zeros((i, o)) for i, o in zip(dims[:-1], dims[1:])],
                       [np.zeros(o) for o in dims[1:]], omega0, seed)
    return siren_init(model, seed, omega0)


def siren_init(model: SirenModel, seed: int, omega0: float = 30.0) -> SirenModel:
    """First layer ``U(-1/n, 1/n)``; later layers ``U(-sqrt(6/n)/omega0, +sqrt(6/n)/omega0)``.

    Biases use the same bound as their layer's weights.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    rng = np.random.default_rng([seed, 0x5112E])
    weights, biases = [], []
    for l, w in enumerate(model.weights):
        fan_in = w.shape[0]
        bound = 1.0 / fan_in if l == 0 else np.sqrt(6.0 / fan_in) / omega0
        weights.append(rng.uniform(-bound, bound, w.shape))
        biases.append(rng.uniform(-bound, bound, w.shape[1]))
    model.weights, model.biases = weights, biases
    model.omega0 = float(omega0)
    model.seed = seed
    return model


def _sine_layer(tape: Tape, x: Tensor, w: Tensor, b: Tensor, omega0: float) -> Tensor:
    # fused sin(omega0 * (x @ w + b)); keeps only the pre-activation for backward
    z = omega0 * (x.value @ w.value + b.value)

    def vjp(g):
        gz = g * np.cos(z)
        gz *= omega0
        return (gz @ w.value.T if x.requires_grad else None, x.value.T @ gz, gz.sum(axis=0))

    return tape.apply(np.sin(z), (x, w, b), vjp)


def _linear(tape: Tape, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    def vjp(g):
        return (g @ w.value.T if x.requires_grad else None, x.value.T @ g, g.sum(axis=0))

    return tape.apply(x.value @ w.value + b.value, (x, w, b), vjp)


def bind(model: SirenModel, tape: Tape) -> list[Tensor]:
    """Register the model's parameters as leaves; order matches ``model.params``."""
    return [tape.leaf(p) for p in model.params]


def forward(model: SirenModel, coords: np.ndarray, tape: Tape, leaves: list[Tensor]) -> Tensor:
    """Recorded forward pass; returns ``(M, n_coils, 2)`` channel-form output."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    h = tape.constant(model.encoding(coords))
    ws, bs = leaves[0::2], leaves[1::2]
    for w, b in zip(ws[:-1], bs[:-1]):
        h = _sine_layer(tape, h, w, b, model.omega0)
    y = _linear(tape, h, ws[-1], bs[-1])
    return y.reshape(len(coords), model.n_coils, 2)


@dataclass
class DcLossConfig:
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def dc_loss(pred: Tensor, meas: np.ndarray, cfg: DcLossConfig | None = None) -> Tensor:
    """High-dynamic-range data consistency: ``mean |pred - meas| / (|meas| + eps)``.

    ``pred`` is a channel-form tensor ``(M, n_coils, 2)``; ``meas`` is complex
    ``(M, n_coils)``.  The modulus is the smooth one from the tape.
    """
    cfg = cfg or DcLossConfig()
    meas = np.asarray(meas, dtype=np.complex128)
    if pred.shape != meas.shape + (2,):
        raise ShapeMismatch(f"prediction {pred.shape} vs measurement {meas.shape}")
    tape = pred.tape
    target = np.stack([meas.real, meas.imag], axis=-1)
    err = tape.complex_abs(pred - target)
    weight = 1.0 / (np.abs(meas) + cfg.epsilon)
    return (err * weight).mean()


# -- checkpoints -----------------------------------------------------------

def save_model(model: SirenModel, directory: str | os.PathLike) -> None:
    """Write ``manifest.json`` plus one ``.nda`` file per array."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    layers = []
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        write_nda(d / f"w{l}.nda", w)
        write_nda(d / f"b{l}.nda", b)
        layers.append({"weight": f"w{l}.nda", "bias": f"b{l}.nda",
                       "fan_in": int(w.shape[0]), "fan_out": int(w.shape[1]),
                       "activation": "sine" if l < len(model.weights) - 1 else "linear"})
    write_nda(d / "encoding_B.nda", model.encoding.B)
    manifest = {"format": "pisco-nik-siren/1", "omega0": model.omega0, "seed": model.seed,
                "n_coils": model.n_coils, "encoding": "encoding_B.nda",
                "layers": layers, "meta": model.meta}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_model(directory: str | os.PathLike) -> SirenModel:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    weights = [read_nda(d / L["weight"]) for L in manifest["layers"]]
    biases = [read_nda(d / L["bias"]) for L in manifest["layers"]]
    enc = FeatureEncoding(read_nda(d / manifest["encoding"]))
    return SirenModel(enc, weights, biases, float(manifest["omega0"]), int(manifest["seed"]),
                      manifest.get("meta", {}))
