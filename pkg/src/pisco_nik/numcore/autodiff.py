"""Tape-based reverse-mode automatic differentiation over float64 arrays.

Complex quantities never appear on the tape; they are carried as a trailing
axis of size 2 holding (real, imag).  Every operation appends one node to
its tape, so the tape order is a valid topological order and the backward
pass is a single reverse sweep.

Example
-------
>>> tape = Tape()
>>> x = tape.leaf(np.array([0.0, 1.0]))
>>> y = (x.sin() * x).sum()
>>> tape.backward(y)
>>> x.grad
array([0.        , 1.38177329])
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeMismatch

#: Floor of the smooth absolute value ``x**2 / sqrt(x**2 + eps**2)``.
EPS_ABS = 1e-12

VJP = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # Sum out axes that were added or stretched by numpy broadcasting.
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def smooth_abs(x: np.ndarray, eps: float = EPS_ABS) -> np.ndarray:
    """``x**2 / sqrt(x**2 + eps**2)``: zero at zero, equal to ``|x|`` once ``|x| >> eps``."""
    x2 = x * x
    return x2 / np.sqrt(x2 + eps * eps)


def _smooth_abs_prime(x: np.ndarray, eps: float = EPS_ABS) -> np.ndarray:
    x2 = x * x
    s2 = x2 + eps * eps
    return x * (x2 + 2 * eps * eps) / (s2 * np.sqrt(s2))


class Tensor:
    """A node on a :class:`Tape` holding a float64 value and, after
    :meth:`Tape.backward`, its gradient."""

    __array_priority__ = 100

    __slots__ = ("value", "grad", "tape", "parents", "vjp", "requires_grad")

    def __init__(self, value, tape: "Tape", parents=(), vjp=None, requires_grad=False):
        self.value = value
        self.grad = None
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            if other.tape is not self.tape:
                raise ValueError("operands live on different tapes")
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return self.tape.add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape.sub(self, self._lift(other))

    def __rsub__(self, other):
        return self.tape.sub(self._lift(other), self)

    def __mul__(self, other):
        return self.tape.mul(self, self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.tape.scale(self, -1.0)

    def __matmul__(self, other):
        return self.tape.matmul(self, self._lift(other))

    def __getitem__(self, index):
        return self.tape.getitem(self, index)

    def sin(self):
        return self.tape.sin(self)

    def sum(self, axis=None):
        return self.tape.sum(self, axis)

    def mean(self, axis=None):
        return self.tape.mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self.tape.reshape(self, shape)

    def transpose(self, *axes):
        return self.tape.transpose(self, axes or None)


class Tape:
    """Ordered record of primitive operations.

    Nodes are appended in creation order.  :meth:`backward` clears any
    previous gradients, seeds the root and sweeps the record in reverse,
    visiting each node once.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __len__(self) -> int:
        return len(self.nodes)

    # -- node creation -------------------------------------------------
    def leaf(self, value, requires_grad: bool = True) -> Tensor:
        node = Tensor(np.asarray(value, dtype=np.float64), self, requires_grad=requires_grad)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Tensor:
        return self.leaf(value, requires_grad=False)

    def apply(self, value: np.ndarray, parents: Sequence[Tensor], vjp: VJP) -> Tensor:
        """Record a custom primitive.

        ``vjp(g)`` receives the output gradient and returns one gradient (or
        ``None``) per parent, each shaped like that parent's value.
        """
        parents = tuple(parents)
        needs = any(p.requires_grad for p in parents)
        node = Tensor(np.asarray(value, dtype=np.float64), self, parents,
                      vjp if needs else None, needs)
        self.nodes.append(node)
        return node

    def release(self) -> None:
        """Drop the record so its arrays are freed without waiting for the cycle collector."""
        self.nodes = []

    # -- backward ------------------------------------------------------
    def backward(self, root: Tensor, seed=None) -> None:
        if root.tape is not self:
            raise ValueError("root is not on this tape")
        for node in self.nodes:
            node.grad = None
        if seed is None:
            if root.value.size != 1:
                raise ShapeMismatch("backward from a non-scalar needs an explicit seed")
            seed = np.ones_like(root.value)
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != root.shape:
            raise ShapeMismatch(f"seed shape {seed.shape} != root shape {root.shape}")
        root.grad = seed
        for node in reversed(self.nodes):
            if node.grad is None or node.vjp is None:
                continue
            for parent, g in zip(node.parents, node.vjp(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # -- elementwise ---------------------------------------------------
    def add(self, a: Tensor, b: Tensor) -> Tensor:
        _check_broadcast(a, b)
        return self.apply(a.value + b.value, (a, b),
                          lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        _check_broadcast(a, b)
        return self.apply(a.value - b.value, (a, b),
                          lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        _check_broadcast(a, b)
        av, bv = a.value, b.value
        return self.apply(av * bv, (a, b),
                          lambda g: (_unbroadcast(g * bv, a.shape) if a.requires_grad else None,
                                     _unbroadcast(g * av, b.shape) if b.requires_grad else None))

    def scale(self, a: Tensor, c: float) -> Tensor:
        c = float(c)
        return self.apply(a.value * c, (a,), lambda g: (g * c,))

    def sin(self, a: Tensor) -> Tensor:
        return self.apply(np.sin(a.value), (a,), lambda g: (g * np.cos(a.value),))

    def smooth_abs(self, a: Tensor, eps: float = EPS_ABS) -> Tensor:
        return self.apply(smooth_abs(a.value, eps), (a,),
                          lambda g: (g * _smooth_abs_prime(a.value, eps),))

    def complex_abs(self, a: Tensor, eps: float = EPS_ABS) -> Tensor:
        """Smooth modulus over a trailing (real, imag) axis."""
        if a.shape[-1] != 2:
            raise ShapeMismatch("complex_abs expects a trailing axis of size 2")
        r2 = (a.value * a.value).sum(axis=-1)
        s2 = r2 + eps * eps
        s = np.sqrt(s2)
        out = r2 / s
        # d(r2/s)/d(r2) = (r2 + 2 eps^2) / (2 s^3); d(r2)/da = 2a
        coef = (r2 + 2 * eps * eps) / (s2 * s)

        def vjp(g):
            return ((g * coef)[..., None] * a.value,)

        return self.apply(out, (a,), vjp)

    # -- linear algebra ------------------------------------------------
    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"matmul of {a.shape} and {b.shape}")
        av, bv = a.value, b.value
        return self.apply(av @ bv, (a, b),
                          lambda g: (g @ bv.T if a.requires_grad else None,
                                     av.T @ g if b.requires_grad else None))

    # -- reductions and reshaping --------------------------------------
    def sum(self, a: Tensor, axis=None) -> Tensor:
        shape = a.shape

        def vjp(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return self.apply(np.asarray(a.value.sum(axis=axis)), (a,), vjp)

    def mean(self, a: Tensor, axis=None) -> Tensor:
        n = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
        return self.scale(self.sum(a, axis), 1.0 / n)

    def reshape(self, a: Tensor, shape) -> Tensor:
        old = a.shape
        return self.apply(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))

    def transpose(self, a: Tensor, axes=None) -> Tensor:
        inv = None if axes is None else np.argsort(axes)
        return self.apply(np.transpose(a.value, axes), (a,),
                          lambda g: (np.transpose(g, inv),))

    def getitem(self, a: Tensor, index) -> Tensor:
        shape = a.shape
        basic = all(isinstance(i, (slice, int, type(Ellipsis)))
                    for i in (index if isinstance(index, tuple) else (index,)))

        def vjp(g):
            out = np.zeros(shape)
            if basic:
                out[index] = g
            else:
                np.add.at(out, index, g)
            return (out,)

        return self.apply(a.value[index], (a,), vjp)

    def take(self, a: Tensor, indices, axis: int = 0) -> Tensor:
        """Gather along one axis; repeated indices accumulate gradient."""
        indices = np.asarray(indices, dtype=np.intp)
        shape = a.shape
        unique = len(np.unique(indices)) == indices.size

        def vjp(g):
            out = np.zeros(shape)
            gm = np.moveaxis(g, axis, 0)
            om = np.moveaxis(out, axis, 0)
            if unique:
                om[indices] = gm
            else:
                np.add.at(om, indices, gm)
            return (out,)

        return self.apply(np.take(a.value, indices, axis=axis), (a,), vjp)

    def concat(self, parts: Sequence[Tensor], axis: int = 0) -> Tensor:
        sizes = [p.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]
        return self.apply(np.concatenate([p.value for p in parts], axis=axis), parts,
                          lambda g: tuple(np.split(g, splits, axis=axis)))

    def stack(self, parts: Sequence[Tensor], axis: int = 0) -> Tensor:
        n = len(parts)
        return self.apply(np.stack([p.value for p in parts], axis=axis), parts,
                          lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)))


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}") from exc
