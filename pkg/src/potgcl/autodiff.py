"""Tape-based reverse-mode differentiation over dense float64 matrices.

Every tensor is two-dimensional.  One-dimensional inputs become row
vectors, scalars become 1x1.  Operations only record themselves while a
:class:`Tape` is active (``with Tape() as tape: ...``); outside a tape
they are plain numpy computations, which doubles as a no-grad mode.

Broadcasting is limited to adding/multiplying a 1xn row vector (or a 1x1
scalar) against an mxn matrix, which covers bias addition.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DegenerateEmbeddingError, DimensionError

_state = threading.local()

NORM_EPS = 1e-12


def _stack():
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = _state.stack = []
    return stack


def active_tape():
    stack = _stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad():
    """Suspend recording on every active tape of this thread."""
    stack = _stack()
    saved = stack[:]
    stack.clear()
    try:
        yield
    finally:
        stack[:] = saved


class Tape:
    """Ordered record of the operations executed while it is active."""

    def __init__(self):
        self.nodes = []
        self.consumed = False

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().remove(self)
        return False

    def record(self, tensor):
        tensor.tape_node = (self, len(self.nodes))
        self.nodes.append(tensor)

    def reset(self):
        for node in self.nodes:
            node.tape_node = None
        self.nodes = []
        self.consumed = False

    def backward(self, loss):
        if loss.shape != (1, 1):
            raise ContractError(f"backward needs a 1x1 loss, got {loss.shape}")
        if loss.tape_node is None or loss.tape_node[0] is not self:
            raise ContractError("loss was not recorded on this tape")
        if self.consumed:
            raise ContractError("backward already ran on this tape; reset it first")
        self.consumed = True

        end = loss.tape_node[1]
        grads = {id(loss): np.ones((1, 1))}
        for node in reversed(self.nodes[: end + 1]):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.is_leaf:
                    parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
                else:
                    key = id(parent)
                    grads[key] = grads[key] + pg if key in grads else pg
        # drop tape -> tensor references so the graph is freed without the cycle collector
        self.nodes = []


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable ``requires_grad`` leaf."""
    if loss.tape_node is None:
        raise ContractError("loss is not attached to a tape")
    loss.tape_node[0].backward(loss)


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "tape_node", "_parents", "_backward", "name")

    def __init__(self, values, requires_grad=False, name=None):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got ndim={arr.ndim}")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.tape_node = None
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_leaf(self):
        return not self._parents

    def zero_grad(self):
        self.grad = None

    def item(self):
        if self.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def numpy(self):
        return self.values

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    __array_priority__ = 100

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(values, parents, backward_fn):
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad = None
    out.tape_node = None
    out.name = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        tape.record(out)
    return out


def _broadcast_shape(a, b):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return sa
    for small, big in ((sa, sb), (sb, sa)):
        if small == (1, 1) or (small[0] == 1 and small[1] == big[1]):
            return big
    raise DimensionError(f"incompatible shapes {sa} and {sb}")


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    sa, sb = a.shape, b.shape
    return _result(a.values + b.values, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a):
    a = as_tensor(a)
    return _result(-a.values, (a,), lambda g: (-g,))


def sub(a, b):
    return add(a, neg(b))


def mul(a, b):
    """Elementwise product (row-vector / scalar broadcasting allowed)."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    av, bv = a.values, b.values
    sa, sb = a.shape, b.shape
    return _result(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)))


def scale(a, c):
    a = as_tensor(a)
    c = float(c)
    return _result(a.values * c, (a,), lambda g: (g * c,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    av, bv = a.values, b.values
    return _result(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a):
    a = as_tensor(a)
    return _result(a.values.T.copy(), (a,), lambda g: (g.T,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.values)
    return _result(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    av = a.values
    return _result(np.log(av), (a,), lambda g: (g / av,))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(a):
    """log(1 + e^x), stable for large |x|."""
    a = as_tensor(a)
    av = a.values
    return _result(np.logaddexp(0.0, av), (a,), lambda g: (g * _sigmoid(av),))


def prelu(a, gamma):
    """max(x, 0) + gamma * min(x, 0); the kink takes the positive slope."""
    a = as_tensor(a)
    pos = a.values >= 0
    slope = np.where(pos, 1.0, gamma)
    return _result(a.values * slope, (a,), lambda g: (g * slope,))


def elu(a, alpha=1.0):
    a = as_tensor(a)
    av = a.values
    neg_part = np.expm1(np.minimum(av, 0.0))
    out = np.where(av > 0, av, alpha * neg_part)
    slope = np.where(av > 0, 1.0, alpha * (neg_part + 1.0))
    return _result(out, (a,), lambda g: (g * slope,))


def sum(a):  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    shape = a.shape
    return _result(np.array([[a.values.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def mean(a):
    a = as_tensor(a)
    shape = a.shape
    n = a.values.size
    return _result(np.array([[a.values.mean()]]), (a,), lambda g: (np.full(shape, g[0, 0] / n),))


def rowsum(a):
    a = as_tensor(a)
    cols = a.shape[1]
    return _result(a.values.sum(axis=1, keepdims=True), (a,), lambda g: (np.repeat(g, cols, axis=1),))


def take_rows(a, idx):
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.shape

    def grad(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.values[idx], (a,), grad)


def take_cols(a, idx):
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.shape

    def grad(g):
        out = np.zeros(shape)
        np.add.at(out.T, idx, g.T)
        return (out,)

    return _result(a.values[:, idx], (a,), grad)


def segment_sum(a, segments, num_segments):
    """Row ``s`` of the result sums the rows of ``a`` whose segment id is ``s``."""
    a = as_tensor(a)
    segments = np.asarray(segments, dtype=np.intp)
    if segments.shape != (a.shape[0],):
        raise DimensionError("one segment id per row is required")
    out = np.zeros((num_segments, a.shape[1]))
    np.add.at(out, segments, a.values)
    return _result(out, (a,), lambda g: (g[segments],))


def l2_normalize_rows(a):
    a = as_tensor(a)
    norms = np.linalg.norm(a.values, axis=1, keepdims=True)
    bad = np.flatnonzero(norms[:, 0] < NORM_EPS)
    if bad.size:
        raise DegenerateEmbeddingError(f"rows with zero norm: {bad[:10].tolist()}")
    y = a.values / norms

    def grad(g):
        return ((g - y * np.sum(g * y, axis=1, keepdims=True)) / norms,)

    return _result(y, (a,), grad)


def stop_gradient(a):
    """Same values, detached from the tape."""
    return Tensor(as_tensor(a).values.copy())
