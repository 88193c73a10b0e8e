"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Every operation returns a new :class:`Tensor` that remembers its parents and
a closure that pushes the output gradient back into them. ``backward`` walks
the graph in reverse topological order. Gradients accumulate with ``+=``
across fan-out, so callers reset parameter gradients between steps.

Arrays may carry leading batch dimensions; binary operations broadcast like
numpy and reduce gradients back to the operand shape.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager

import numpy as np

from .errors import DimensionError, DomainError, GraphError

COSINE_EPS = 1e-8
LOG_FLOOR = 1e-12

_ids = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording (inference only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A node in the computation graph.

    ``data`` is the forward value, ``grad`` the accumulated adjoint (``None``
    until something flows into it). Leaves created by the user have
    ``op == "leaf"`` and no parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward", "id")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, op="leaf", parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self.parents = parents
        self._backward = backward
        self.id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, op, parents, backward):
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, op, parents, backward)
    return Tensor(data, False, op)


def _accumulate(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True).reshape(t.data.shape)
    else:
        t.grad += g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# --- elementwise -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.shape))

    return _make(out, "add", (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(out, "sub", (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(out, "mul", (a, b), backward)


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - y * y))

    return _make(y, "tanh", (x,), backward)


def sigmoid(x):
    x = as_tensor(x)
    # tanh form: no overflow for large |x|
    y = 0.5 + 0.5 * np.tanh(0.5 * x.data)

    def backward(g):
        _accumulate(x, g * y * (1.0 - y))

    return _make(y, "sigmoid", (x,), backward)


def log(x, floor=LOG_FLOOR):
    """Natural log of ``max(x, floor)``; zero gradient where clamped."""
    x = as_tensor(x)
    clamped = np.maximum(x.data, floor)
    y = np.log(clamped)

    def backward(g):
        _accumulate(x, np.where(x.data > floor, g / clamped, 0.0))

    return _make(y, "log", (x,), backward)


# --- linear algebra ----------------------------------------------------------

def matmul(a, b):
    """Matrix product over the last two axes, broadcasting leading axes.

    1-D operands are promoted the numpy way (row vector on the left, column
    vector on the right) and squeezed back.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise DimensionError(f"matmul needs at least 1-D operands, got {a.shape} x {b.shape}")
    if a.ndim == 1:
        return reshape(matmul(reshape(a, (1, a.shape[0])), b), b.shape[:-2] + b.shape[-1:])
    if b.ndim == 1:
        return reshape(matmul(a, reshape(b, (b.shape[0], 1))), a.shape[:-1])
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            if b.ndim == 2:
                k, n = b.shape
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
            _accumulate(b, gb)

    return _make(out, "matmul", (a, b), backward)


def transpose(x, axes=None):
    """Permute axes; default swaps the last two."""
    x = as_tensor(x)
    if axes is None:
        axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2) if x.ndim >= 2 else (0,)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.transpose(x.data, axes)

    def backward(g):
        _accumulate(x, np.transpose(g, inverse))

    return _make(out, "transpose", (x,), backward)


def reshape(x, shape):
    x = as_tensor(x)
    out = x.data.reshape(shape)

    def backward(g):
        _accumulate(x, g.reshape(x.shape))

    return _make(out, "reshape", (x,), backward)


# --- structural --------------------------------------------------------------

def index(x, idx):
    x = as_tensor(x)
    out = x.data[idx]
    basic = not any(isinstance(i, (list, np.ndarray)) for i in (idx if isinstance(idx, tuple) else (idx,)))

    def backward(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        if basic:
            x.grad[idx] += g
        else:
            np.add.at(x.grad, idx, g)

    return _make(out, "index", (x,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            if t.requires_grad:
                _accumulate(t, piece)

    return _make(out, "concat", tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    lead = (slice(None),) * (axis % out.ndim)

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                _accumulate(t, g[lead + (i,)])

    return _make(out, "stack", tuple(tensors), backward)


# --- reductions --------------------------------------------------------------

def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _make(out, "sum", (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


# --- normalizers -------------------------------------------------------------

def softmax(v, axis=-1):
    """Max-shifted softmax along ``axis``."""
    v = as_tensor(v)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise DomainError("softmax of an empty vector")
    z = v.data - v.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(v, y * (g - np.sum(g * y, axis=axis, keepdims=True)))

    return _make(y, "softmax", (v,), backward)


def cosine_similarity(a, b, eps=COSINE_EPS):
    """``dot(a, b) / max(|a| |b|, eps)`` along the last axis (broadcasting).

    The floor only engages for (near-)zero vectors, which get similarity 0;
    elsewhere the result is exactly scale invariant.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1:] != b.shape[-1:] or a.ndim == 0:
        raise DimensionError(f"cosine_similarity shape mismatch: {a.shape} vs {b.shape}")
    dot = np.sum(a.data * b.data, axis=-1)
    sq_a = np.sum(a.data * a.data, axis=-1)
    sq_b = np.sum(b.data * b.data, axis=-1)
    norms = np.sqrt(sq_a) * np.sqrt(sq_b)
    active = norms > eps
    denom = np.where(active, norms, eps)
    out = np.clip(dot / denom, -1.0, 1.0)  # rounding can overshoot by an ulp

    def backward(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            ka = np.where(active, out / sq_a, 0.0)[..., None]
            kb = np.where(active, out / sq_b, 0.0)[..., None]
        g = g[..., None]
        d = denom[..., None]
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * (b.data / d - ka * a.data), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * (a.data / d - kb * b.data), b.shape))

    return _make(out, "cosine", (a, b), backward)


# --- fused recurrence ----------------------------------------------------------

def lstm_sequence(xproj, Wh, reverse=False):
    """Whole-sequence LSTM recurrence as a single graph node.

    ``xproj`` is ``(B, t, 4h)`` holding the input projections plus bias, gates
    ordered input, forget, output, candidate; ``Wh`` is ``(h, 4h)``. Returns
    hidden states ``(B, t, h)`` in position order, zero initial state. The
    result matches the same recurrence composed from primitive ops.
    """
    from . import kernels

    xproj, Wh = as_tensor(xproj), as_tensor(Wh)
    if xproj.ndim != 3 or xproj.shape[-1] != Wh.shape[-1] or Wh.shape[-1] != 4 * Wh.shape[0]:
        raise DimensionError(f"lstm_sequence shape mismatch: xproj {xproj.shape}, Wh {Wh.shape}")
    cache = kernels.lstm_forward(xproj.data, Wh.data, reverse)

    def backward(g):
        dx, dWh = kernels.lstm_backward(g, Wh.data, reverse, cache)
        if xproj.requires_grad:
            _accumulate(xproj, dx)
        if Wh.requires_grad:
            _accumulate(Wh, dWh)

    return _make(cache[0], "lstm", (xproj, Wh), backward)


# --- driver ------------------------------------------------------------------

def topological_order(loss):
    """Nodes reachable from ``loss`` with parents before children."""
    order = []
    state = {}  # id -> 1 visiting, 2 done
    stack_ = [(loss, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            state[node.id] = 2
            order.append(node)
            continue
        s = state.get(node.id)
        if s == 2:
            continue
        if s == 1:
            raise GraphError(f"cycle detected at node {node.id} ({node.op})")
        state[node.id] = 1
        stack_.append((node, True))
        for p in node.parents:
            ps = state.get(p.id)
            if ps == 1:
                raise GraphError(f"cycle detected at node {p.id} ({p.op})")
            if ps is None and p.requires_grad:
                stack_.append((p, False))
    return order


def backward(loss):
    """Back-propagate from a scalar ``loss``.

    Returns ``{node id: gradient array}`` for every node that requires grad.
    """
    if loss.size != 1:
        raise DomainError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = topological_order(loss)
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return {node.id: node.grad for node in order if node.grad is not None}
