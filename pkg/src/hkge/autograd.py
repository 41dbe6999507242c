"""Tape-based reverse-mode differentiation over numpy arrays.

Every primitive in this module accepts either plain numpy values or
:class:`Tensor` objects.  With plain inputs it simply returns the numpy
result, so the same geometry code serves inference (no bookkeeping) and
training (recorded on the active :class:`Tape`).

Complex quantities are carried as (real, imag) pairs of real tensors; the
complex multiply / conjugate helpers at the bottom are compositions of the
real primitives.

Example::

    w = Parameter(np.ones(3), name="w")
    with Tape() as tape:
        loss = inner(w, w, keepdims=False)
    tape.backward(loss)
    w.grad  # -> array([2., 2., 2.])
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import StructuralError

ARTANH_LIMIT = 1.0 - 1e-5
ARCOSH_FLOOR = 1.0 + 1e-12

PRIMITIVES = frozenset({
    "add", "sub", "neg", "mul", "scalar_mul", "div",
    "sum", "inner", "norm", "sqrt", "log", "exp",
    "tanh", "artanh", "arcosh", "softplus", "softmax", "logsumexp",
    "clamp", "gather", "index", "stack", "reshape",
    "dft", "idft", "givens",
})

_local = threading.local()
_ids = itertools.count()


class Tensor:
    """A float64 array that may participate in gradient recording."""

    # numpy defers to our reflected operators instead of broadcasting over us
    __array_ufunc__ = None

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"{type(self).__name__}({self.value!r})"

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value)

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return index(self, key)


class Parameter(Tensor):
    """A trainable leaf with a persistent gradient accumulator."""

    def __init__(self, value, name: str | None = None):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True)
        self.uid = next(_ids)
        self.name = name if name is not None else f"param{self.uid}"
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter(name={self.name!r}, shape={self.shape})"


@dataclass(eq=False)
class Node:
    primitive: str
    inputs: tuple
    output: Tensor
    vjp: Callable


class Tape:
    """Append-only record of primitive applications.

    One tape belongs to one thread; use it as a context manager to make it
    the recording target for every primitive evaluated inside the block.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._consumed = False

    def __enter__(self):
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _tape_stack().pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def append(self, node: Node):
        self.nodes.append(node)

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(parameter) into every reachable Parameter."""
        if not isinstance(loss, Tensor) or loss.size != 1:
            raise StructuralError("backward needs a scalar loss tensor")
        if self._consumed:
            raise StructuralError("this tape was already swept backward")
        self._consumed = True
        if isinstance(loss, Parameter):
            loss.grad += 1.0
            return
        grads = {id(loss): np.ones_like(loss.value)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                if isinstance(inp, Parameter):
                    inp.grad += gi
                else:
                    key = id(inp)
                    if key in grads:
                        grads[key] = grads[key] + gi
                    else:
                        grads[key] = gi


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def current_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def record(primitive: str, inputs: Sequence, value, vjp: Callable) -> Tensor:
    """Wrap ``value`` as the output of ``primitive`` applied to ``inputs``.

    ``vjp`` maps the output cotangent to one cotangent (or None) per input.
    Nothing is stored when no tape is active or no input needs gradients.
    """
    if primitive not in PRIMITIVES:
        raise StructuralError(f"unknown primitive {primitive!r}")
    tape = current_tape()
    track = tape is not None and any(
        isinstance(t, Tensor) and t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=track)
    if track:
        tape.append(Node(primitive, tuple(inputs), out, vjp))
    return out


def value(x):
    """The numpy value behind ``x`` (identity for non-tensors)."""
    return x.value if isinstance(x, Tensor) else x


def _is_t(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    shape = tuple(shape)
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _shape(x):
    return np.shape(value(x))


# -- arithmetic ------------------------------------------------------------

def add(x, y):
    if not _is_t(x, y):
        return np.add(x, y)
    sx, sy = _shape(x), _shape(y)
    return record("add", (x, y), value(x) + value(y),
                  lambda g: (unbroadcast(g, sx), unbroadcast(g, sy)))


def sub(x, y):
    if not _is_t(x, y):
        return np.subtract(x, y)
    sx, sy = _shape(x), _shape(y)
    return record("sub", (x, y), value(x) - value(y),
                  lambda g: (unbroadcast(g, sx), unbroadcast(-g, sy)))


def neg(x):
    if not _is_t(x):
        return np.negative(x)
    return record("neg", (x,), -x.value, lambda g: (-g,))


def mul(x, y):
    if not _is_t(x, y):
        return np.multiply(x, y)
    if np.isscalar(x):
        x, y = y, x
    if np.isscalar(y):
        s = float(y)
        return record("scalar_mul", (x,), x.value * s, lambda g: (g * s,))
    xv, yv = value(x), value(y)
    return record("mul", (x, y), xv * yv,
                  lambda g: (unbroadcast(g * yv, np.shape(xv)),
                             unbroadcast(g * xv, np.shape(yv))))


def div(x, y):
    if not _is_t(x, y):
        return np.divide(x, y)
    xv, yv = value(x), value(y)
    out = xv / yv
    return record("div", (x, y), out,
                  lambda g: (unbroadcast(g / yv, np.shape(xv)),
                             unbroadcast(-g * out / yv, np.shape(yv))))


# -- reductions ------------------------------------------------------------

def _expand(g, axis, keepdims, shape):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    if not _is_t(x):
        return np.sum(x, axis=axis, keepdims=keepdims)
    shape = x.shape
    return record("sum", (x,), np.sum(x.value, axis=axis, keepdims=keepdims),
                  lambda g: (_expand(g, axis, keepdims, shape).copy(),))


def mean(x, axis=None, keepdims=False):
    n = np.size(value(x)) if axis is None else np.shape(value(x))[axis]
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def inner(x, y, axis=-1, keepdims=True):
    """Euclidean inner product along ``axis``."""
    if not _is_t(x, y):
        return np.sum(np.multiply(x, y), axis=axis, keepdims=keepdims)
    xv, yv = value(x), value(y)
    out = np.sum(xv * yv, axis=axis, keepdims=keepdims)
    full = np.broadcast_shapes(np.shape(xv), np.shape(yv))

    def vjp(g):
        g = _expand(g, axis, keepdims, full)
        return unbroadcast(g * yv, np.shape(xv)), unbroadcast(g * xv, np.shape(yv))

    return record("inner", (x, y), out, vjp)


def norm(x, axis=-1, keepdims=True):
    """Euclidean norm; the gradient at the origin is taken to be zero."""
    if not _is_t(x):
        return np.sqrt(np.sum(np.square(x), axis=axis, keepdims=keepdims))
    xv = x.value
    out = np.sqrt(np.sum(xv * xv, axis=axis, keepdims=keepdims))

    def vjp(g):
        n = out if keepdims else np.expand_dims(out, axis)
        g = g if keepdims else np.expand_dims(g, axis)
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, g / safe, 0.0) * xv,)

    return record("norm", (x,), out, vjp)


# -- elementwise -----------------------------------------------------------

def sqrt(x):
    if not _is_t(x):
        return np.sqrt(x)
    y = np.sqrt(x.value)
    safe = np.where(y > 0, y, 1.0)
    return record("sqrt", (x,), y, lambda g: (np.where(y > 0, g / (2.0 * safe), 0.0),))


def log(x):
    if not _is_t(x):
        return np.log(x)
    xv = x.value
    return record("log", (x,), np.log(xv), lambda g: (g / xv,))


def exp(x):
    if not _is_t(x):
        return np.exp(x)
    y = np.exp(x.value)
    return record("exp", (x,), y, lambda g: (g * y,))


def tanh(x):
    if not _is_t(x):
        return np.tanh(x)
    y = np.tanh(x.value)
    return record("tanh", (x,), y, lambda g: (g * (1.0 - y * y),))


def _artanh(u):
    return 0.5 * np.log((1.0 + u) / (1.0 - u))


def artanh(x):
    """artanh with its argument clamped to [-(1-1e-5), 1-1e-5]."""
    if not _is_t(x):
        return _artanh(np.clip(x, -ARTANH_LIMIT, ARTANH_LIMIT))
    xv = x.value
    u = np.clip(xv, -ARTANH_LIMIT, ARTANH_LIMIT)
    live = np.abs(xv) <= ARTANH_LIMIT
    return record("artanh", (x,), _artanh(u),
                  lambda g: (np.where(live, g / (1.0 - u * u), 0.0),))


def _arcosh(u):
    return np.log(u + np.sqrt(u * u - 1.0))


def arcosh(x):
    """arcosh with its argument clamped to >= 1 + 1e-12."""
    if not _is_t(x):
        return _arcosh(np.maximum(x, ARCOSH_FLOOR))
    xv = x.value
    u = np.maximum(xv, ARCOSH_FLOOR)
    live = xv >= ARCOSH_FLOOR
    return record("arcosh", (x,), _arcosh(u),
                  lambda g: (np.where(live, g / np.sqrt(u * u - 1.0), 0.0),))


def _softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def softplus(x):
    if not _is_t(x):
        return _softplus(x)
    xv = x.value
    sig = 0.5 * (1.0 + np.tanh(0.5 * xv))
    return record("softplus", (x,), _softplus(xv), lambda g: (g * sig,))


def _softmax(x, axis):
    z = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def softmax(x, axis=-1):
    if not _is_t(x):
        return _softmax(x, axis)
    y = _softmax(x.value, axis)
    return record("softmax", (x,), y,
                  lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),))


def logsumexp(x, axis=-1, keepdims=False):
    xv = value(x)
    m = np.max(xv, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(xv - m), axis=axis, keepdims=True))
    if not keepdims:
        out = np.squeeze(out, axis=axis)
    if not _is_t(x):
        return out
    y = _softmax(xv, axis)

    def vjp(g):
        g = g if keepdims else np.expand_dims(g, axis)
        return (g * y,)

    return record("logsumexp", (x,), out, vjp)


def clamp(x, lo=None, hi=None):
    """Clip to [lo, hi]; the gradient is zero wherever the clip is active."""
    if not _is_t(x):
        return np.clip(x, lo, hi)
    xv = x.value
    live = np.ones(xv.shape, dtype=bool)
    if lo is not None:
        live &= xv >= lo
    if hi is not None:
        live &= xv <= hi
    return record("clamp", (x,), np.clip(xv, lo, hi),
                  lambda g: (np.where(live, g, 0.0),))


# -- structure -------------------------------------------------------------

def take(table, idx):
    """Row lookup ``table[idx]`` with scatter-add backward."""
    idx = np.asarray(idx)
    if not _is_t(table):
        return table[idx]
    shape = table.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return record("gather", (table,), table.value[idx], vjp)


def index(x, key):
    if not _is_t(x):
        return x[key]
    shape = x.shape
    basic = not any(isinstance(k, (list, np.ndarray))
                    for k in (key if isinstance(key, tuple) else (key,)))

    def vjp(g):
        out = np.zeros(shape)
        if basic:
            out[key] += g
        else:
            np.add.at(out, key, g)
        return (out,)

    return record("index", (x,), x.value[key], vjp)


def stack(xs, axis=-1):
    xs = list(xs)
    if not _is_t(*xs):
        return np.stack(xs, axis=axis)
    vals = [np.broadcast_to(value(x), np.broadcast_shapes(*[_shape(t) for t in xs]))
            for x in xs]
    shapes = [_shape(x) for x in xs]
    out = np.stack(vals, axis=axis)

    def vjp(g):
        return tuple(unbroadcast(np.take(g, i, axis=axis), s)
                     for i, s in enumerate(shapes))

    return record("stack", tuple(xs), out, vjp)


def reshape(x, shape):
    if not _is_t(x):
        return np.reshape(x, shape)
    old = x.shape
    return record("reshape", (x,), x.value.reshape(shape),
                  lambda g: (g.reshape(old),))


# -- complex pairs ---------------------------------------------------------

def complex_mul(ar, ai, br, bi):
    """(ar + i ai)(br + i bi) as a (real, imag) pair."""
    return ar * br - ai * bi, ar * bi + ai * br


def complex_conj(ar, ai):
    return ar, -ai
