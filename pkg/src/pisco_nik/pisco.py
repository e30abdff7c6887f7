"""Parallel-imaging-inspired self-consistency (PISCO) regularizer.

Linear neighborhood weights are solved independently on several subsets of
predicted k-space.  If one global linear relationship holds, all subsets
yield the same weights; the loss penalizes their pairwise complex-L1
distance and is differentiable through each least-squares solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TooFewSamples
from .neighborhood import (
    KernelGeometry,
    SubsetSystem,
    build_patches,
    overdetermination,
    partition_order,
)
from .nik import SirenModel, bind, forward
from .numcore import Tape, Tensor, solve_tikhonov, tikhonov_op, to_channels


@dataclass
class PiscoConfig:
    """Regularizer settings.

    ``coils_out`` limits how many target coils are solved for per step
    (``None`` means all).  ``grad_through`` is ``"both"`` (P and T) or
    ``"targets"`` (T only).  ``partition`` is ``"temporal"`` or ``"random"``.
    """

    alpha: float = 1e-4
    f_od: float = 1.1
    lam: float = 0.01
    coils_out: int | None = None
    distance: str = "complex-l1"
    grad_through: str = "both"
    partition: str = "temporal"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.f_od <= 1:
            raise ValueError("f_od must be > 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.coils_out is not None and self.coils_out < 1:
            raise ValueError("coils_out must be >= 1")
        if self.distance != "complex-l1":
            raise ValueError(f"unsupported distance {self.distance!r}")
        if self.grad_through not in ("both", "targets"):
            raise ValueError(f"grad_through must be 'both' or 'targets'")


@dataclass
class WeightSet:
    """Solved weights ``W`` of shape ``(n_neighbors * n_coils_in, n_coils_out)``.

    ``min_eig`` is the smallest eigenvalue of the regularized normal matrix.
    """

    W: np.ndarray
    subset_id: int = 0
    min_eig: float | None = None
    kernel: KernelGeometry | None = None


def solve_subset_weights(systems: list[SubsetSystem], alpha: float) -> list[WeightSet]:
    """Tikhonov-regularized weights for each subset, in input order."""
    if len(systems) < 2:
        raise TooFewSamples(f"need at least 2 subsets, got {len(systems)}")
    out = []
    for i, s in enumerate(systems):
        if s.P.shape[0] < s.P.shape[1]:
            raise TooFewSamples(f"subset {i} has {s.P.shape[0]} rows for {s.P.shape[1]} unknowns")
        W = solve_tikhonov(s.P, s.T, alpha)
        s_min = np.linalg.svd(s.P, compute_uv=False)[-1]
        out.append(WeightSet(W, i, float(s_min**2 + alpha)))
    return out


def _pairwise_l1(tape: Tape, W: Tensor) -> Tensor:
    n_s = W.shape[0]
    rest = W.shape[1:]
    # sort each entry across subsets so the summation order, and hence the
    # rounded result, does not depend on how the subsets are numbered
    order = np.argsort(W.value, axis=0, kind="stable")
    flat = (order * W.value[0].size + np.arange(W.value[0].size).reshape(rest)).ravel()
    W = tape.take(W.reshape(-1), flat, axis=0).reshape(W.shape)
    diff = W.reshape((n_s, 1) + rest) - W.reshape((1, n_s) + rest)
    # trailing (re, im) axis: |Re| + |Im| summed with every other entry
    return tape.smooth_abs(diff).sum() * (1.0 / n_s**2)


def pisco_loss(weights):
    """Mean pairwise complex-L1 distance over all ordered pairs (diagonal included).

    ``weights`` is either a channel-form tensor ``(N_s, K, C, 2)``, in which
    case a differentiable scalar tensor is returned, or a sequence of
    :class:`WeightSet` / complex arrays, returning a float.
    """
    if isinstance(weights, Tensor):
        if weights.ndim != 4 or weights.shape[-1] != 2:
            raise ShapeMismatch(f"expected (N_s, K, C, 2), got {weights.shape}")
        if weights.shape[0] < 2:
            raise TooFewSamples("pisco_loss needs at least 2 weight sets")
        return _pairwise_l1(weights.tape, weights)
    mats = [w.W if isinstance(w, WeightSet) else np.asarray(w) for w in weights]
    if len(mats) < 2:
        raise TooFewSamples("pisco_loss needs at least 2 weight sets")
    if any(m.shape != mats[0].shape for m in mats):
        raise ShapeMismatch("weight sets differ in shape")
    tape = Tape()
    return float(_pairwise_l1(tape, tape.constant(to_channels(np.stack(mats)))).value)


def coil_window(step: int, n_coils: int, n_out: int | None) -> np.ndarray:
    """Contiguous (wrapping) window of output coils, advanced round-robin per step."""
    if n_out is None or n_out >= n_coils:
        return np.arange(n_coils)
    start = (step * n_out) % n_coils
    return (start + np.arange(n_out)) % n_coils


@dataclass
class PiscoResult:
    loss: float
    raw_loss: float
    grads: list[np.ndarray]
    weights: np.ndarray
    n_subsets: int


def pisco_step(
    model: SirenModel,
    batch_coords: np.ndarray,
    kernel: KernelGeometry,
    cfg: PiscoConfig,
    step: int = 0,
    rng: np.random.Generator | None = None,
) -> PiscoResult:
    """Query targets and their patches, solve each subset and backpropagate ``lam * L``.

    Returns the weighted loss, the unweighted loss, parameter gradients in
    ``model.params`` order and the solved weights ``(N_s, K, C)``.
    """
    targets = np.asarray(batch_coords, dtype=np.float64).reshape(-1, 3)
    m = len(targets)
    n_c = model.n_coils
    out_coils = coil_window(step, n_c, cfg.coils_out)
    n_n = kernel.n_neighbors
    _, n_m = overdetermination(n_n, n_c, len(out_coils), cfg.f_od)
    n_s = m // n_m
    if n_s < 2:
        raise TooFewSamples(f"batch of {m} gives {n_s} subsets of {n_m} rows; need >= 2")

    patches = build_patches(targets, kernel)
    tape = Tape()
    leaves = bind(model, tape)
    y = forward(model, np.concatenate([targets, patches.reshape(-1, 3)]), tape, leaves)

    order = partition_order(targets[:, 2], cfg.partition, rng)[: n_s * n_m]
    y_t = tape.take(tape.take(y[:m], out_coils, axis=1), order, axis=0)
    y_p = tape.take(y[m:].reshape(m, n_n * n_c, 2), order, axis=0)
    P = y_p.reshape(n_s, n_m, n_n * n_c, 2)
    T = y_t.reshape(n_s, n_m, len(out_coils), 2)

    W = tikhonov_op(tape, P, T, cfg.alpha, cfg.grad_through)
    raw = pisco_loss(W)
    total = tape.scale(raw, cfg.lam)
    tape.backward(total)
    grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]
    Wc = W.value[..., 0] + 1j * W.value[..., 1]
    tape.release()
    return PiscoResult(float(total.value), float(raw.value), grads, Wc, n_s)
