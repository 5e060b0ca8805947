"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Every operation that touches a gradient-tracked tensor records its parents and
a backward closure on the result. ``backward`` on a scalar loss replays the
recorded graph in reverse topological order and accumulates gradients into the
``grad`` buffers of every tensor that requires them. Gradients accumulate
across repeated backward calls until ``zero_grads`` resets them.

Evaluation-only code can wrap forward passes in ``no_grad()`` to skip the
tape entirely.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeError, UsageError, VocabError

LOG_EPS = 1e-7  # clamp floor for cross-entropy logs

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """n-dimensional float64 array, optionally participating in the tape.

    ``grad`` is a zero-initialised same-shape buffer exactly when
    ``requires_grad`` is set and ``None`` otherwise. For tensors produced by
    operations the buffer materialises on first access, so untouched
    intermediates cost nothing.
    """

    __slots__ = ("data", "requires_grad", "_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence] | None = None

    @property
    def grad(self) -> np.ndarray | None:
        if self._grad is None and self.requires_grad:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        """Accumulate d(self)/d(param) into every reachable grad buffer.

        Only defined for scalars (the loss). Repeated calls without zeroing
        add another copy of the gradient.
        """
        if self.data.size != 1:
            raise UsageError(
                f"backward() requires a scalar loss, got shape {self.shape}"
            )
        if not self.requires_grad:
            return
        order = _topo_order(self)
        flow: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = flow.pop(id(node), None)
            if g is None:
                continue
            if node._grad is not None:
                node._grad += g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                acc = flow.get(id(parent))
                flow[id(parent)] = pg if acc is None else acc + pg

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return _scalar_affine(self, 1.0, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, neg(other))
        return _scalar_affine(self, 1.0, -float(other))

    def __rsub__(self, other):
        return _scalar_affine(self, -1.0, float(other))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return _scalar_affine(self, float(other), 0.0)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return _scalar_affine(self, 1.0 / float(other), 0.0)

    def __pow__(self, exponent):
        return power(self, float(exponent))

    def __matmul__(self, other):
        return matmul(self, other)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        # grad buffer stays lazy: op results rarely need one materialised
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    squeezed = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if squeezed:
        grad = grad.sum(axis=squeezed, keepdims=True)
    return grad.reshape(shape)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        if p._grad is not None:
            p._grad[...] = 0.0


# -- elementwise arithmetic -------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    return _result(
        data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    return _result(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def _scalar_affine(a: Tensor, scale: float, shift: float) -> Tensor:
    return _result(a.data * scale + shift, (a,), lambda g: (g * scale,))


def power(a: Tensor, exponent: float) -> Tensor:
    data = a.data**exponent
    return _result(
        data, (a,), lambda g: (g * exponent * a.data ** (exponent - 1.0),)
    )


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product on the trailing two axes; leading axes broadcast."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs matrices, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as exc:
        raise ShapeError(f"matmul batch extents disagree: {a.shape} @ {b.shape}") from exc
    data = a.data @ b.data

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _result(data, (a, b), backward)


# -- shape manipulation ------------------------------------------------------


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = a.data.reshape(shape)
    return _result(data, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return _result(
        np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),)
    )


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis``; the gradient splits back to each part."""
    if not parts:
        raise UsageError("concat of an empty list")
    ndim = parts[0].data.ndim
    axis = axis % ndim
    for p in parts[1:]:
        if p.data.ndim != ndim or any(
            i != axis and p.shape[i] != parts[0].shape[i] for i in range(ndim)
        ):
            raise ShapeError(
                "concat parts disagree off-axis: "
                + ", ".join(str(q.shape) for q in parts)
            )
    data = np.concatenate([p.data for p in parts], axis=axis)
    offsets = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, offsets, axis=axis))

    return _result(data, tuple(parts), backward)


# -- indexed access ----------------------------------------------------------


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]`` with scatter-add gradient into the table."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise VocabError(
            f"token id out of range [0, {table.shape[0]}): "
            f"min {ids.min()}, max {ids.max()}"
        )
    data = table.data[ids]

    def backward(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (buf,)

    return _result(data, (table,), backward)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Per-batch row pick: out[b] = x[b, idx[b]]."""
    idx = np.asarray(idx)
    n = x.shape[0]
    if idx.shape != (n,):
        raise ShapeError(f"gather_rows index shape {idx.shape} for batch {n}")
    rows = np.arange(n)
    data = x.data[rows, idx]

    def backward(g):
        buf = np.zeros_like(x.data)
        np.add.at(buf, (rows, idx), g)
        return (buf,)

    return _result(data, (x,), backward)


def permute_rows(x: Tensor, perm: np.ndarray) -> Tensor:
    """Reorder the leading axis by a permutation; gradient applies its inverse."""
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(x.shape[0])):
        raise UsageError(f"not a permutation of {x.shape[0]} rows: {perm}")

    def backward(g):
        buf = np.empty_like(g)
        buf[perm] = g
        return (buf,)

    return _result(x.data[perm], (x,), backward)


# -- reductions --------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _result(data, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# -- nonlinearities ----------------------------------------------------------


def sigmoid(a: Tensor) -> Tensor:
    """Elementwise 1/(1+e^-x), stable for large |x|; outputs in (0, 1)."""
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _result(data, (a,), lambda g: (g * data * (1.0 - data),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``; rows sum to one."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - inner),)

    return _result(data, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit (tanh approximation)."""
    k = math.sqrt(2.0 / math.pi)
    x = a.data
    x2 = x * x
    t = np.tanh(k * (x + 0.044715 * x2 * x))
    data = 0.5 * x * (1.0 + t)

    def backward(g):
        du = k * (1.0 + 0.134145 * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du),)

    return _result(data, (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis to zero mean and unit variance, then
    apply a learned per-channel affine."""
    d = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    data = xhat * gain.data + bias.data

    def backward(g):
        gx = g * gain.data
        inner = (
            gx
            - gx.mean(axis=-1, keepdims=True)
            - xhat * np.mean(gx * xhat, axis=-1, keepdims=True)
        )
        return (
            inv * inner,
            (g * xhat).reshape(-1, d).sum(axis=0),
            g.reshape(-1, d).sum(axis=0),
        )

    return _result(data, (x, gain, bias), backward)


def tlog(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise DomainError("log of a non-positive value")
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only where the input was in range."""
    data = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)
    return _result(data, (a,), lambda g: (g * mask,))


# -- losses ------------------------------------------------------------------


def bce(pred: Tensor, target) -> Tensor:
    """Mean binary cross entropy with predictions clamped to [ε, 1-ε].

    ``target`` holds hard labels; any value outside {0, 1} is rejected.
    """
    t = np.asarray(getattr(target, "data", target), dtype=np.float64)
    if not np.all((t == 0.0) | (t == 1.0)):
        raise DomainError("bce targets must be exactly 0 or 1")
    if t.shape != pred.shape:
        raise ShapeError(f"bce shapes disagree: pred {pred.shape}, target {t.shape}")
    p = clamp(pred, LOG_EPS, 1.0 - LOG_EPS)
    tt = Tensor(t)
    losses = neg(add(mul(tt, tlog(p)), mul(1.0 - tt, tlog(1.0 - p))))
    return tmean(losses)
