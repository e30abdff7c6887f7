"""scikit-learn style front end for the k-space network."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .kspace import KSampleSet
from .nik import DcLossConfig, build_model
from .pisco import PiscoConfig
from .recon import FrameStack, reconstruct_frames
from .trainer import TrainConfig, train
from .validation import check_coords, check_is_fitted, check_samples


class ScaledModel:
    """Model view that multiplies predictions by ``scale`` (undoes data normalization)."""
    def __init__(self, model, scale):
        self.model = model
        self.scale = scale

    def predict(self, coords):
        return self.model.predict(coords) * self.scale


class NIKReconstructor(RegressorMixin, BaseEstimator):
    """Neural implicit k-space model with optional PISCO regularization.

    ``fit(X, y)`` takes coordinates ``X`` of shape ``(M, 3)`` holding
    (k_x, k_y, t) and complex multi-coil samples ``y`` of shape
    ``(M, n_coils)``.  Samples are divided by their largest magnitude before
    training and rescaled on prediction.

    ``delta`` is the neighbor spacing of the consistency kernel in
    normalized k-space units (one readout step, ``1 / n_fe``).  With
    ``pisco=False`` or ``lam=0`` the model trains on data consistency alone.

    Examples
    --------
    >>> est = NIKReconstructor(hidden=32, epochs=5, e_pre=5, batch_size=512, pisco=False)
    >>> est.fit(coords, values).predict(coords[:3]).shape        # doctest: +SKIP
    (3, 6)
    """

    def __init__(
        self,
        *,
        hidden=512,
        layers=4,
        omega0=30.0,
        n_freq=128,
        sigma_k=32.0,
        sigma_t=4.0,
        epochs=1000,
        e_pre=200,
        batch_size=10000,
        lr=3e-5,
        pisco_lr=None,
        pisco=True,
        alpha=1e-4,
        f_od=1.1,
        lam=0.01,
        kernel_size=(3, 3),
        delta=1 / 64,
        coils_out=None,
        grad_through="both",
        partition="temporal",
        dc_epsilon=1e-3,
        seed=0,
    ):
        self.hidden = hidden
        self.layers = layers
        self.omega0 = omega0
        self.n_freq = n_freq
        self.sigma_k = sigma_k
        self.sigma_t = sigma_t
        self.epochs = epochs
        self.e_pre = e_pre
        self.batch_size = batch_size
        self.lr = lr
        self.pisco_lr = pisco_lr
        self.pisco = pisco
        self.alpha = alpha
        self.f_od = f_od
        self.lam = lam
        self.kernel_size = kernel_size
        self.delta = delta
        self.coils_out = coils_out
        self.grad_through = grad_through
        self.partition = partition
        self.dc_epsilon = dc_epsilon
        self.seed = seed

    def train_config(self) -> TrainConfig:
        pcfg = None
        if self.pisco:
            pcfg = PiscoConfig(alpha=self.alpha, f_od=self.f_od, lam=self.lam, coils_out=self.coils_out,
                               grad_through=self.grad_through, partition=self.partition)
        return TrainConfig(epochs=self.epochs, e_pre=self.e_pre, batch_size=self.batch_size, lr=self.lr,
                           pisco_lr=self.pisco_lr,
                           seed=self.seed, pisco=pcfg, kernel_size=tuple(self.kernel_size),
                           delta=self.delta, dc=DcLossConfig(self.dc_epsilon))

    def fit(self, X, y, callback=None):
        X = check_coords(X)
        y = check_samples(y, len(X))
        scale = float(np.abs(y).max())
        self.scale_ = scale if scale > 0 else 1.0
        data = KSampleSet(X, y / self.scale_)
        model = build_model(y.shape[1], hidden=self.hidden, layers=self.layers, omega0=self.omega0,
                            n_freq=self.n_freq, sigma_k=self.sigma_k, sigma_t=self.sigma_t, seed=self.seed)
        model.meta["scale"] = self.scale_
        self.model_, self.log_ = train(data, model, self.train_config(), callback=callback)
        self.n_coils_ = y.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(check_coords(X)) * self.scale_

    def score(self, X, y, sample_weight=None):
        """Negative mean relative error ``|pred - y| / (|y| + eps)`` on normalized samples."""
        y = check_samples(y, len(check_coords(X)))
        pred = self.predict(X)
        err = np.abs(pred - y) / self.scale_ / (np.abs(y) / self.scale_ + self.dc_epsilon)
        return -float(np.mean(err))

    def reconstruct(self, t_values, maps) -> FrameStack:
        """Coil-combined images at each navigator value in ``t_values``."""
        check_is_fitted(self, "model_")
        return reconstruct_frames(ScaledModel(self.model_, self.scale_), maps, np.atleast_1d(t_values))
