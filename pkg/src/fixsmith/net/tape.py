"""Minimal reverse-mode autodiff over float64 numpy arrays.

Operations recorded while a Tape is active (``with Tape() as tape:``) can be
differentiated once with ``tape.backward(loss)``; gradients accumulate on the
``grad`` attribute of every participating Tensor.  With no active tape the
same operations run as plain numpy, so inference pays no recording cost.

The operator set is exactly what the fix model needs: dense algebra, the
usual activations, softmax, gather/slice, concat, reductions, and a fused
LSTM cell.  Creation order on the tape is a valid topological order, so the
reverse pass is a single reversed sweep.
"""

from __future__ import annotations

import threading

import numpy as np


class GraphError(RuntimeError):
    """The tape was already consumed by a backward pass."""


class ShapeError(ValueError):
    """Operand shapes or index ranges do not fit the operation."""


_STATE = threading.local()


def active_tape() -> "Tape | None":
    stack = getattr(_STATE, "stack", None)
    return stack[-1] if stack else None


class Tape:
    __slots__ = ("_nodes", "_consumed")

    def __init__(self) -> None:
        self._nodes: list[Tensor] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        stack = getattr(_STATE, "stack", None)
        if stack is None:
            stack = _STATE.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _STATE.stack.pop()

    def backward(self, loss: "Tensor") -> None:
        """Reverse sweep from a scalar loss recorded on this tape."""
        if self._consumed:
            raise GraphError("tape already consumed; rebuild the forward graph")
        self._consumed = True
        if loss.data.size != 1:
            raise ShapeError("backward expects a scalar loss")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)
        self._nodes = []


class Tensor:
    __slots__ = ("data", "grad", "_backward")

    # force numpy to defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, data) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __float__(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"

    def zero_grad(self) -> None:
        self.grad = None

    # operator sugar; implementations below
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

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("divide by a plain scalar or array, not a Tensor")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def _record(data: np.ndarray, backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    tape = active_tape()
    if tape is None:
        out._backward = None
    else:
        out._backward = backward()
        tape._nodes.append(out)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow warnings for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def add(a, b) -> Tensor:
    ta, tb = isinstance(a, Tensor), isinstance(b, Tensor)
    av = a.data if ta else np.asarray(a, dtype=np.float64)
    bv = b.data if tb else np.asarray(b, dtype=np.float64)
    data = av + bv

    def backward():
        def bw(g):
            if ta:
                _accum(a, _unbroadcast(g, av.shape))
            if tb:
                _accum(b, _unbroadcast(g, bv.shape))
        return bw

    return _record(data, backward)


def sub(a, b) -> Tensor:
    ta, tb = isinstance(a, Tensor), isinstance(b, Tensor)
    av = a.data if ta else np.asarray(a, dtype=np.float64)
    bv = b.data if tb else np.asarray(b, dtype=np.float64)
    data = av - bv

    def backward():
        def bw(g):
            if ta:
                _accum(a, _unbroadcast(g, av.shape))
            if tb:
                _accum(b, _unbroadcast(-g, bv.shape))
        return bw

    return _record(data, backward)


def mul(a, b) -> Tensor:
    ta, tb = isinstance(a, Tensor), isinstance(b, Tensor)
    av = a.data if ta else np.asarray(a, dtype=np.float64)
    bv = b.data if tb else np.asarray(b, dtype=np.float64)
    data = av * bv

    def backward():
        def bw(g):
            if ta:
                _accum(a, _unbroadcast(g * bv, av.shape))
            if tb:
                _accum(b, _unbroadcast(g * av, bv.shape))
        return bw

    return _record(data, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ta, tb = isinstance(a, Tensor), isinstance(b, Tensor)
    av = a.data if ta else np.asarray(a, dtype=np.float64)
    bv = b.data if tb else np.asarray(b, dtype=np.float64)
    if av.ndim != 2 or bv.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {av.shape} @ {bv.shape}")
    data = av @ bv

    def backward():
        def bw(g):
            if ta:
                _accum(a, g @ bv.T)
            if tb:
                _accum(b, av.T @ g)
        return bw

    return _record(data, backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward():
        def bw(g):
            _accum(x, g * (1.0 - y * y))
        return bw

    return _record(y, backward)


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)

    def backward():
        def bw(g):
            _accum(x, g * y * (1.0 - y))
        return bw

    return _record(y, backward)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def backward():
        def bw(g):
            _accum(x, g * y)
        return bw

    return _record(y, backward)


def log(x: Tensor) -> Tensor:
    data = np.log(x.data)

    def backward():
        def bw(g):
            _accum(x, g / x.data)
        return bw

    return _record(data, backward)


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)

    def backward():
        def bw(g):
            _accum(x, g * 0.5 / y)
        return bw

    return _record(y, backward)


def clamp_min(x: Tensor, lo: float) -> Tensor:
    data = np.maximum(x.data, lo)
    mask = x.data > lo

    def backward():
        def bw(g):
            _accum(x, g * mask)
        return bw

    return _record(data, backward)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward():
        def bw(g):
            if axis is None:
                _accum(x, np.broadcast_to(g, x.data.shape).copy())
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                _accum(x, np.broadcast_to(gg, x.data.shape).copy())
        return bw

    return _record(data, backward)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return tsum(x, axis=axis, keepdims=keepdims) / n


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    datas = [p.data for p in parts]
    data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]

    def backward():
        def bw(g):
            offset = 0
            for part, size in zip(parts, sizes):
                index = [slice(None)] * g.ndim
                index[axis] = slice(offset, offset + size)
                _accum(part, g[tuple(index)])
                offset += size
        return bw

    return _record(data, backward)


def take(x: Tensor, key) -> Tensor:
    """Basic indexing (ints and slices); gradient scatters back into place."""
    data = x.data[key]

    def backward():
        def bw(g):
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[key] += g
        return bw

    return _record(data, backward)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Row lookup (embeddings, beam reordering); duplicates accumulate."""
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise ShapeError(f"row index out of range for shape {x.data.shape}")
    data = x.data[idx]

    def backward():
        def bw(g):
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, idx, g)
        return bw

    return _record(data, backward)


def transpose(x: Tensor) -> Tensor:
    data = x.data.T

    def backward():
        def bw(g):
            _accum(x, g.T)
        return bw

    return _record(data, backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward():
        def bw(g):
            inner = (g * y).sum(axis=axis, keepdims=True)
            _accum(x, y * (g - inner))
        return bw

    return _record(y, backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate is 0.  Train-time only."""
    if rate <= 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return mul(x, mask)


def lstm_cell(a: Tensor, c_prev: Tensor, hidden: int) -> tuple[Tensor, Tensor]:
    """Fused LSTM cell: a is the pre-activation (B, 4H) in i|f|g|o layout.

    Returns (h, c).  The two outputs are registered c first, h second, so the
    reversed sweep folds h's contribution into c's gradient before the cell
    state node runs.
    """
    A = a.data
    if A.ndim != 2 or A.shape[1] != 4 * hidden:
        raise ShapeError(f"lstm_cell expects (B, {4 * hidden}), got {A.shape}")
    H = hidden
    i = _sigmoid(A[:, :H])
    f = _sigmoid(A[:, H:2 * H])
    g_ = np.tanh(A[:, 2 * H:3 * H])
    o = _sigmoid(A[:, 3 * H:])
    c = f * c_prev.data + i * g_
    tc = np.tanh(c)
    h = o * tc

    def backward_c():
        def bw(gc):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[:, :H] += gc * g_ * i * (1.0 - i)
            a.grad[:, H:2 * H] += gc * c_prev.data * f * (1.0 - f)
            a.grad[:, 2 * H:3 * H] += gc * i * (1.0 - g_ * g_)
            _accum(c_prev, gc * f)
        return bw

    c_t = _record(c, backward_c)

    def backward_h():
        def bw(gh):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[:, 3 * H:] += gh * tc * o * (1.0 - o)
            _accum(c_t, gh * o * (1.0 - tc * tc))
        return bw

    h_t = _record(h, backward_h)
    return h_t, c_t
