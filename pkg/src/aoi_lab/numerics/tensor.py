"""Dense float64 tensors with a reverse-mode tape.

Only the handful of primitives the attention policy needs are provided.  Shapes
are explicit: the one broadcast allowed is adding/multiplying a vector along
the last axis (bias, norm affine) and multiplying a batched operand by a shared
2-D weight.
"""
from __future__ import annotations

import contextlib

import numpy as np

from ..exceptions import DimensionError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording (inference, baselines, finite differences)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _shape_error(op, a, b):
    return DimensionError(f"{op}: incompatible shapes {tuple(a.shape)} and {tuple(b.shape)}")


def _is_lastdim_vector(a, b):
    return b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]


def _sum_to_vector(g):
    return g.reshape(-1, g.shape[-1]).sum(axis=0)


# --- elementwise ---------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return _result(a.data + b.data, (a, b), lambda g: (g, g))
    if _is_lastdim_vector(a, b):
        return _result(a.data + b.data, (a, b), lambda g: (g, _sum_to_vector(g)))
    raise _shape_error("add", a, b)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise _shape_error("sub", a, b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))
    if _is_lastdim_vector(a, b):
        return _result(a.data * b.data, (a, b), lambda g: (g * b.data, _sum_to_vector(g * a.data)))
    raise _shape_error("mul", a, b)


def scale(a, c):
    c = float(c)
    return _result(a.data * c, (a,), lambda g: (g * c,))


def tanh(a):
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a):
    pos = a.data > 0
    return _result(np.where(pos, a.data, 0.0), (a,), lambda g: (g * pos,))


def log(a):
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def masked_fill(a, mask, value):
    """Replace entries where ``mask`` is true by the constant ``value`` (no gradient flows there)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise DimensionError(f"masked_fill: mask shape {mask.shape} does not match {a.shape}")
    keep = ~mask
    return _result(np.where(mask, value, a.data), (a,), lambda g: (g * keep,))


def softmax(a, axis=-1):
    """Softmax along ``axis``; entries equal to -inf come out as exact zeros."""
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (a,), back)


softmax_rows = softmax


# --- linear algebra / layout ---------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise _shape_error("matmul", a, b)
    if b.ndim == 2:
        y = a.data @ b.data

        def back(g):
            ga = g @ b.data.T
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb

        return _result(y, (a, b), back)
    if a.shape[:-2] != b.shape[:-2]:
        raise _shape_error("matmul", a, b)
    y = a.data @ b.data
    return _result(y, (a, b), lambda g: (g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g))


def transpose(a, axes=None):
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def reshape(a, shape):
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(s != r for k, (s, r) in enumerate(zip(t.shape, ref)) if k != ax):
            raise _shape_error("concat", tensors[0], t)
    sizes = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    return _result(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors),
                   lambda g: tuple(np.split(g, sizes, axis=ax)))


def take(a, index, axis=0):
    """``np.take`` along one axis; repeated indices accumulate their gradients."""
    index = np.asarray(index, dtype=np.int64)
    ax = axis % a.ndim

    def back(g):
        ga = np.zeros_like(a.data)
        moved = np.moveaxis(ga, ax, 0)
        np.add.at(moved, index, np.moveaxis(g, ax, 0))
        return (ga,)

    return _result(np.take(a.data, index, axis=ax), (a,), back)


def index_rows(a, index):
    """Pick ``a[b, index[b]]`` for every leading batch entry b."""
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (a.shape[0],):
        raise DimensionError(f"index_rows: index shape {index.shape} does not match batch {a.shape[0]}")
    rows = np.arange(a.shape[0])

    def back(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, index), g)
        return (ga,)

    return _result(a.data[rows, index], (a,), back)


def sum(a):  # noqa: A001 - mirrors the numpy name on purpose
    return _result(np.array(a.data.sum()), (a,), lambda g: (np.full_like(a.data, g),))


# --- normalization -------------------------------------------------------

def _normalize(a, gamma, beta, axis, eps):
    mu = a.data.mean(axis=axis, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def back(g):
        gx = g * gamma.data
        dx = inv * (gx - gx.mean(axis=axis, keepdims=True) - xhat * (gx * xhat).mean(axis=axis, keepdims=True))
        return dx, _sum_to_vector(g * xhat), _sum_to_vector(g)

    return _result(y, (a, gamma, beta), back)


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalize each row over the feature (last) axis, then apply the affine map."""
    if gamma.shape != (a.shape[-1],) or beta.shape != (a.shape[-1],):
        raise _shape_error("layer_norm", a, gamma)
    return _normalize(a, gamma, beta, -1, eps)


def batch_norm_tokens(a, gamma, beta, eps=1e-10):
    """Normalize every feature over the token axis (-2) of each instance separately."""
    if a.ndim < 2 or gamma.shape != (a.shape[-1],) or beta.shape != (a.shape[-1],):
        raise _shape_error("batch_norm_tokens", a, gamma)
    return _normalize(a, gamma, beta, -2, eps)


# --- reverse pass --------------------------------------------------------

def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf with ``requires_grad``.

    The recorded graph is released afterwards, so each forward supports one
    backward pass.
    """
    if loss.data.size != 1 or loss.ndim > 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for p, gp in zip(node._parents, node._backward(g)):
            if not p.requires_grad or gp is None:
                continue
            key = id(p)
            grads[key] = gp if key not in grads else grads[key] + gp
        node._parents = ()
        node._backward = None


def gradients(loss, tensors):
    """Run :func:`backward` and return d(loss)/d(t) for each of ``tensors``.

    Tensors the loss does not depend on get an all-zero gradient.
    """
    for t in tensors:
        t.grad = None
    backward(loss)
    return [np.zeros_like(t.data) if t.grad is None else t.grad for t in tensors]
