"""Training loop: data consistency updates alternating with PISCO updates."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch
from .kspace import KSampleSet
from .neighborhood import kernel_offsets, overdetermination
from .nik import DcLossConfig, SirenModel, bind, dc_loss, forward
from .numcore import Tape
from .pisco import PiscoConfig, pisco_step

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params, grads, state: AdamState, lr: float = 3e-5, betas=(0.9, 0.999), eps: float = 1e-8):
    """One bias-corrected Adam update; returns new parameter arrays and state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and optimizer state differ in length")
    b1, b2 = betas
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


@dataclass
class TrainConfig:
    """Training hyperparameters; ``pisco=None`` trains the plain data-consistency model.

    ``pisco_lr`` is the step size of the PISCO optimizer; ``None`` reuses ``lr``.
    """

    epochs: int = 1000
    e_pre: int = 200
    batch_size: int = 10000
    lr: float = 3e-5
    pisco_lr: float | None = None
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    pisco: PiscoConfig | None = field(default_factory=PiscoConfig)
    kernel_size: tuple[int, int] = (3, 3)
    delta: float = 1 / 64
    dc: DcLossConfig = field(default_factory=DcLossConfig)

    def __post_init__(self):
        if not 0 <= self.e_pre <= self.epochs:
            raise ValueError("need 0 <= e_pre <= epochs")
        if self.lr <= 0 or (self.pisco_lr is not None and self.pisco_lr <= 0):
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class StepRecord:
    epoch: int
    step: int
    l_dc: float
    l_pisco: float | None
    ratio: float | None
    ms: float


@dataclass
class TrainLog:
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def epoch_mean(self, epoch: int, key: str = "l_dc") -> float:
        vals = [getattr(r, key) for r in self.records if r.epoch == epoch and getattr(r, key) is not None]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def pisco_steps(self) -> list[StepRecord]:
        return [r for r in self.records if r.l_pisco is not None]

    def rows(self, timing: bool = True):
        for r in self.records:
            yield [r.epoch, r.step, repr(r.l_dc),
                   "" if r.l_pisco is None else repr(r.l_pisco),
                   "" if r.ratio is None else repr(r.ratio),
                   f"{r.ms:.3f}" if timing else ""]

    def to_csv(self, path, timing: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "step", "l_dc", "l_pisco", "ratio", "ms"])
            w.writerows(self.rows(timing))


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    # near-equal batches so no trailing batch is too small for the subset solves
    perm = rng.permutation(n)
    return np.array_split(perm, max(1, math.ceil(n / batch_size)))


def train(data: KSampleSet, model: SirenModel, cfg: TrainConfig, callback=None):
    """Fit ``model`` to ``data`` and return ``(model, TrainLog)``.

    Every batch gets a data-consistency Adam step (optimizer A).  From epoch
    ``e_pre + 1`` on, and only if ``cfg.pisco`` is set, the same batch's
    coordinates also drive a PISCO step with its own Adam state (optimizer
    B).  The two gradients are never summed.  Epochs are numbered from 1.
    ``callback(epoch, model, log)`` runs after every epoch.
    """
    if len(data) == 0:
        raise ValueError("no training samples")
    if data.n_coils != model.n_coils:
        raise ShapeMismatch(f"data has {data.n_coils} coils, model predicts {model.n_coils}")
    kernel = kernel_offsets(cfg.kernel_size, cfg.delta)
    pcfg = cfg.pisco
    if pcfg is not None:
        n_out = pcfg.coils_out or model.n_coils
        _, n_m = overdetermination(kernel.n_neighbors, model.n_coils, min(n_out, model.n_coils), pcfg.f_od)
        smallest = len(data) // max(1, math.ceil(len(data) / cfg.batch_size))
        if cfg.e_pre < cfg.epochs and smallest < 2 * n_m:
            raise ValueError(f"batches of ~{smallest} rows cannot form two subsets of {n_m}")

    opt_dc = AdamState.zeros_like(model.params)
    opt_pisco = AdamState.zeros_like(model.params)
    tlog = TrainLog()
    step = 0
    n_pisco = 0
    for epoch in range(1, cfg.epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch])
        for idx in _batches(len(data), cfg.batch_size, rng):
            t0 = time.perf_counter()
            coords = data.coords[idx]
            tape = Tape()
            leaves = bind(model, tape)
            loss = dc_loss(forward(model, coords, tape, leaves), data.values[idx], cfg.dc)
            l_dc = float(loss.value)
            if not np.isfinite(l_dc):
                raise NonFiniteLoss(f"data consistency loss is {l_dc} at epoch {epoch}, step {step}")
            tape.backward(loss)
            grads = [lf.grad for lf in leaves]
            tape.release()
            new, opt_dc = adam_step(model.params, grads, opt_dc, cfg.lr, cfg.betas, cfg.eps)
            model.set_params(new)

            l_pisco = ratio = None
            if pcfg is not None and epoch > cfg.e_pre:
                res = pisco_step(model, coords, kernel, pcfg, step=n_pisco, rng=rng)
                n_pisco += 1
                l_pisco = res.loss
                if not np.isfinite(l_pisco):
                    raise NonFiniteLoss(f"PISCO loss is {l_pisco} at epoch {epoch}, step {step}")
                ratio = l_dc / l_pisco if l_pisco > 0 else float("inf")
                new, opt_pisco = adam_step(model.params, res.grads, opt_pisco,
                                           cfg.lr if cfg.pisco_lr is None else cfg.pisco_lr,
                                           cfg.betas, cfg.eps)
                model.set_params(new)
            tlog.records.append(StepRecord(epoch, step, l_dc, l_pisco, ratio,
                                           1e3 * (time.perf_counter() - t0)))
            step += 1
        if log.isEnabledFor(logging.DEBUG):
            log.debug("epoch %d: l_dc=%.5g l_pisco=%.5g", epoch, tlog.epoch_mean(epoch),
                      tlog.epoch_mean(epoch, "l_pisco"))
        if callback is not None:
            callback(epoch, model, tlog)
    return model, tlog
