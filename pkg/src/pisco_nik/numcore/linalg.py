"""Dense complex helpers and the Tikhonov-regularized least-squares solve.

Matrices follow the row-sample convention ``T = P @ W``: ``P`` is
``(n_rows, K)``, ``T`` is ``(n_rows, C)`` and ``W`` is ``(K, C)``.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from ..errors import DimensionMismatch, SingularSystem
from .autodiff import Tape, Tensor


def to_channels(z: np.ndarray) -> np.ndarray:
    """Complex array -> float array with a trailing (real, imag) axis."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1).astype(np.float64)


def from_channels(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != 2:
        raise DimensionMismatch(f"expected trailing axis of size 2, got {x.shape}")
    return x[..., 0] + 1j * x[..., 1]


def _check_system(P: np.ndarray, T: np.ndarray, alpha: float) -> None:
    if P.ndim != 2 or T.ndim != 2:
        raise DimensionMismatch(f"P and T must be 2-D, got {P.shape} and {T.shape}")
    if P.shape[0] != T.shape[0]:
        raise DimensionMismatch(f"row counts differ: P {P.shape}, T {T.shape}")
    if min(P.shape) < 1 or T.shape[1] < 1:
        raise DimensionMismatch("empty system")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")


def _factor(P: np.ndarray, alpha: float):
    A = P.conj().T @ P
    A[np.diag_indices_from(A)] += alpha
    try:
        cf = sla.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"normal matrix not positive definite (alpha={alpha})") from exc
    if alpha == 0:
        # unregularized: reject numerically zero pivots, cho_factor only catches negative ones
        d2 = np.abs(np.diag(cf[0])) ** 2
        if d2.min() <= A.shape[0] * np.finfo(float).eps * d2.max():
            raise SingularSystem("normal matrix numerically singular (alpha=0)")
    return cf


def solve_tikhonov(P: np.ndarray, T: np.ndarray, alpha: float) -> np.ndarray:
    """Minimize ``||P W - T||^2 + alpha ||W||^2`` over complex ``W``.

    Solved through the normal equations ``(P^H P + alpha I) W = P^H T`` with a
    Cholesky factorization.

    Raises
    ------
    DimensionMismatch
        If ``P`` and ``T`` have different row counts.
    SingularSystem
        If the normal matrix cannot be factorized (only possible for
        ``alpha == 0`` on rank-deficient ``P``).
    """
    P = np.asarray(P, dtype=np.complex128)
    T = np.asarray(T, dtype=np.complex128)
    _check_system(P, T, alpha)
    cf = _factor(P, alpha)
    return sla.cho_solve(cf, P.conj().T @ T)


def solve_tikhonov_grad(P, T, alpha, W, G):
    """Backpropagate an upstream gradient through :func:`solve_tikhonov`.

    Gradients use the real-parameterized convention: for a real loss ``L``
    and complex entry ``z = a + ib`` the gradient is ``dL/da + i dL/db``
    (twice the Wirtinger derivative with respect to ``conj(z)``).  ``G`` is
    that gradient for ``W``; the returned ``(dP, dT)`` use the same convention.

    With ``M = (P^H P + alpha I)^-1`` and ``Z = M G``::

        dT = P Z
        dP = (T - P W) Z^H - P Z W^H
    """
    P = np.asarray(P, dtype=np.complex128)
    T = np.asarray(T, dtype=np.complex128)
    W = np.asarray(W, dtype=np.complex128)
    G = np.asarray(G, dtype=np.complex128)
    _check_system(P, T, alpha)
    if G.shape != (P.shape[1], T.shape[1]) or W.shape != G.shape:
        raise DimensionMismatch(f"W/G must be {(P.shape[1], T.shape[1])}")
    Z = sla.cho_solve(_factor(P, alpha), G)
    dT = P @ Z
    dP = (T - P @ W) @ Z.conj().T - P @ (Z @ W.conj().T)
    return dP, dT


def tikhonov_op(tape: Tape, P: Tensor, T: Tensor, alpha: float, through: str = "both") -> Tensor:
    """Differentiable batched solve on channel-form tensors.

    ``P`` is ``(..., n_rows, K, 2)`` and ``T`` is ``(..., n_rows, C, 2)``;
    the result is ``(..., K, C, 2)``.  Leading axes index independent
    systems.  ``through="targets"`` blocks the gradient into ``P``.
    """
    if through not in ("both", "targets"):
        raise ValueError(f"through must be 'both' or 'targets', got {through!r}")
    Pc = from_channels(P.value)
    Tc = from_channels(T.value)
    if Pc.shape[:-1] != Tc.shape[:-1]:
        raise DimensionMismatch(f"P {P.shape} and T {T.shape} disagree on leading axes")
    lead = Pc.shape[:-2]
    Pf = Pc.reshape((-1,) + Pc.shape[-2:])
    Tf = Tc.reshape((-1,) + Tc.shape[-2:])
    Wf = np.stack([solve_tikhonov(p, t, alpha) for p, t in zip(Pf, Tf)])

    def vjp(g):
        Gf = from_channels(g).reshape(Wf.shape)
        dPs, dTs = [], []
        for p, t, w, gg in zip(Pf, Tf, Wf, Gf):
            dp, dt = solve_tikhonov_grad(p, t, alpha, w, gg)
            dPs.append(dp)
            dTs.append(dt)
        dP = to_channels(np.stack(dPs)).reshape(P.shape) if through == "both" else None
        dT = to_channels(np.stack(dTs)).reshape(T.shape)
        return dP, dT

    return tape.apply(to_channels(Wf).reshape(lead + Wf.shape[-2:] + (2,)), (P, T), vjp)
