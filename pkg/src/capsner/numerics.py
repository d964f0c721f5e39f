"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation computes its forward value with numpy and, when a tape is
active and some input requires gradients, appends a node holding a backward
closure.  ``Tape.backward`` walks the nodes in exact reverse order of
recording.  Gradients are accumulated (``+=``) so a parameter used at many
time steps receives the sum of its contributions.
"""

from __future__ import annotations

import math

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class ConfigurationError(ValueError):
    """Raised for invalid hyperparameters or settings."""


class NumericError(FloatingPointError):
    """Raised when a non-finite value shows up where it must not."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "__weakref__")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


class Parameter(Tensor):
    """A trainable tensor with a name and a persistent gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, data, name="param"):
        super().__init__(np.array(data, dtype=DTYPE), requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


_ACTIVE: list[Tape] = []


class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; operations evaluated inside the block are
    recorded.  Outside any tape, operations are plain numpy evaluations.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss, grad=None, visit=None):
        if grad is None:
            if loss.data.size != 1:
                raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
            grad = np.ones_like(loss.data)
        loss.grad = np.asarray(grad, dtype=DTYPE)
        for node in reversed(self.nodes):
            if visit is not None:
                visit(node)
            g = node.out.grad
            if g is None:
                continue
            grads = node.backward(g)
            for inp, gi in zip(node.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                if isinstance(inp, Parameter):
                    inp.grad += gi
                elif inp.grad is None:
                    inp.grad = gi
                else:
                    inp.grad = inp.grad + gi
        # release intermediate buffers
        for node in self.nodes:
            if not isinstance(node.out, Parameter):
                node.out.grad = None


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def record(data, inputs, backward):
    out = Tensor(data)
    if _ACTIVE and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _ACTIVE[-1].nodes.append(_Node(out, inputs, backward))
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot combine shapes {a.shape} and {b.shape}") from None


# -- elementwise arithmetic ---------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return record(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return record(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return record(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def matmul(a, b):
    """Matrix product; either side may be a 1-D vector, not both."""
    a, b = as_tensor(a), as_tensor(b)
    if (
        a.ndim not in (1, 2)
        or b.ndim not in (1, 2)
        or a.ndim + b.ndim < 3
        or a.shape[-1] != b.shape[0]
    ):
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    ad, bd = a.data, b.data

    def backward(g):
        if ad.ndim == 1:
            return g @ bd.T, np.outer(ad, g)
        if bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g @ bd.T, ad.T @ g

    return record(ad @ bd, (a, b), backward)


def einsum(subscripts, a, b):
    """Two-operand einsum with explicit output subscripts.

    Each operand's indices must be distinct and every index summed away
    must appear in both operands.
    """
    a, b = as_tensor(a), as_tensor(b)
    lhs, out_idx = subscripts.replace(" ", "").split("->")
    ia, ib = lhs.split(",")
    try:
        data = np.einsum(subscripts, a.data, b.data, optimize=False)
    except ValueError as exc:
        raise DimensionError(f"einsum {subscripts}: {a.shape}, {b.shape}: {exc}") from None
    ad, bd = a.data, b.data

    def backward(g):
        ga = np.einsum(f"{out_idx},{ib}->{ia}", g, bd, optimize=False)
        gb = np.einsum(f"{out_idx},{ia}->{ib}", g, ad, optimize=False)
        return ga, gb

    return record(data, (a, b), backward)


# -- nonlinearities -------------------------------------------------------------


def sigmoid(x):
    x = as_tensor(x)
    d = x.data
    # branchwise form avoids overflow in exp for large |x|
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return record(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh_op(x):
    x = as_tensor(x)
    y = np.tanh(x.data)
    return record(y, (x,), lambda g: (g * (1.0 - y * y),))


def exp(x):
    x = as_tensor(x)
    y = np.exp(x.data)
    return record(y, (x,), lambda g: (g * y,))


def softmax(x, axis=-1):
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax: axis {axis} out of range for shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return record(y, (x,), backward)


def logsumexp(x, axis=-1):
    """log(sum(exp(x))) along ``axis`` (the axis is removed)."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"logsumexp: axis {axis} out of range for shape {x.shape}")
    m = x.data.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.exp(x.data - m).sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    xd = x.data

    def backward(g):
        return (np.expand_dims(g, axis) * np.exp(xd - out),)

    return record(np.squeeze(out, axis=axis), (x,), backward)


def norm(x, axis=-1):
    """Euclidean norm along ``axis``; the gradient at the origin is taken as zero."""
    x = as_tensor(x)
    xd = x.data
    n = np.sqrt((xd * xd).sum(axis=axis))

    def backward(g):
        nk = np.expand_dims(n, axis)
        safe = np.where(nk > 0, nk, 1.0)
        return (np.expand_dims(g, axis) * np.where(nk > 0, xd / safe, 0.0),)

    return record(n, (x,), backward)


# -- shape manipulation ---------------------------------------------------------


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0]
    for t in tensors[1:]:
        if t.ndim != ref.ndim or any(
            sa != sb for k, (sa, sb) in enumerate(zip(ref.shape, t.shape)) if k != axis % ref.ndim
        ):
            raise DimensionError(
                f"concat: shapes {ref.shape} and {t.shape} differ off axis {axis}"
            )
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack: shapes differ: {sorted(shapes)}")

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return record(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {old} as {shape}") from None
    return record(y, (x,), lambda g: (g.reshape(old),))


def transpose(x, axes=None):
    x = as_tensor(x)
    y = np.transpose(x.data, axes)
    inv = None if axes is None else tuple(np.argsort(axes))
    return record(y, (x,), lambda g: (np.transpose(g, inv),))


def getitem(x, index):
    x = as_tensor(x)
    shape = x.shape

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)

    def backward(g):
        out = np.zeros(shape, dtype=DTYPE)
        if basic:
            out[index] = g
        else:
            np.add.at(out, index, g)
        return (out,)

    return record(x.data[index], (x,), backward)


def take_rows(table, indices):
    """Gather rows of a 2-D table; gradient scatters back only into those rows."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.intp)
    shape = table.shape

    def backward(g):
        out = np.zeros(shape, dtype=DTYPE)
        np.add.at(out, idx, g)
        return (out,)

    return record(table.data[idx], (table,), backward)


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return record(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def dropout(x, rate, rng, training):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return record(x.data * keep, (x,), lambda g: (g * keep,))


# -- verification -----------------------------------------------------------------


def grad_check(f, params, eps=1e-5):
    """Compare tape gradients of scalar ``f()`` with central differences.

    ``f`` takes no arguments and returns a scalar Tensor built from
    ``params``.  Returns the largest ``|analytic - numeric| / max(1, |analytic|)``
    over every parameter entry.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ConfigurationError(f"eps must lie in [1e-6, 1e-4], got {eps}")
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    if not np.all(np.isfinite(loss.data)):
        raise NumericError("loss is not finite at the checked point")
    tape.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = f().item()
            flat[k] = orig - eps
            down = f().item()
            flat[k] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericError(f"non-finite value while perturbing {p.name}[{k}]")
            numeric = (up - down) / (2.0 * eps)
            a = analytic.reshape(-1)[k]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst
