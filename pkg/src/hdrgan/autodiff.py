"""Minimal reverse-mode automatic differentiation over numpy arrays.

Provides exactly the operations the tone-mapping networks and losses
need: elementwise arithmetic, activations, reductions, dense matmul,
valid 2-D convolution (via the kernel backend's im2col/col2im),
kernel-2 stride-2 transposed convolution, 2x2 max pooling, reflect
padding, channel concatenation, and bicubic factor-2 decimation.
Everything is deterministic; dtype follows the operands.
"""

import numpy as np

from . import _kernels as K
from . import resample


class Tensor:
    """An array node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward",
                 "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None,
                 name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return pow_const(self, p)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


def _toposort(root):
    """Reverse topological order of the graph reachable from ``root``."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order[::-1]


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _needs(*tensors):
    return any(t.requires_grad for t in tensors)


def _sum_to_shape(g, shape):
    """Reduce a broadcast gradient back to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = a.data + b.data

    def backward(g):
        return _sum_to_shape(g, a.data.shape), _sum_to_shape(g, b.data.shape)

    return Tensor(out, _needs(a, b), (a, b), backward)


def sub(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = a.data - b.data

    def backward(g):
        return _sum_to_shape(g, a.data.shape), -_sum_to_shape(g, b.data.shape)

    return Tensor(out, _needs(a, b), (a, b), backward)


def mul(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = a.data * b.data

    def backward(g):
        return (_sum_to_shape(g * b.data, a.data.shape),
                _sum_to_shape(g * a.data, b.data.shape))

    return Tensor(out, _needs(a, b), (a, b), backward)


def div(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = a.data / b.data

    def backward(g):
        return (_sum_to_shape(g / b.data, a.data.shape),
                _sum_to_shape(-g * out / b.data, b.data.shape))

    return Tensor(out, _needs(a, b), (a, b), backward)


def pow_const(a, p):
    a = _as_tensor(a)
    out = a.data ** p

    def backward(g):
        return (g * p * a.data ** (p - 1),)

    return Tensor(out, a.requires_grad, (a,), backward)


def log(a):
    a = _as_tensor(a)
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return Tensor(out, a.requires_grad, (a,), backward)


def sqrt(a):
    a = _as_tensor(a)
    out = np.sqrt(a.data)

    def backward(g):
        return (g * (0.5 / out),)

    return Tensor(out, a.requires_grad, (a,), backward)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor(a.data * mask, a.requires_grad, (a,), backward)


def leaky_relu(a, slope=0.2):
    a = _as_tensor(a)
    factor = np.where(a.data > 0, a.data.dtype.type(1.0),
                      a.data.dtype.type(slope))

    def backward(g):
        return (g * factor,)

    return Tensor(a.data * factor, a.requires_grad, (a,), backward)


def sigmoid(a):
    a = _as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        return (g * out * (1.0 - out),)

    return Tensor(out, a.requires_grad, (a,), backward)


# ---------------------------------------------------------------------------
# reductions and shaping
# ---------------------------------------------------------------------------

def sum_(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return Tensor(out, a.requires_grad, (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def reshape(a, shape):
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.data.shape),)

    return Tensor(out, a.requires_grad, (a,), backward)


def concat(tensors, axis=1):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, _needs(*tensors), tuple(tensors), backward)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data @ b.data

    def backward(g):
        return (g @ b.data.T, a.data.T @ g)

    return Tensor(out, _needs(a, b), (a, b), backward)


# ---------------------------------------------------------------------------
# spatial operators (NCHW)
# ---------------------------------------------------------------------------

def pad_reflect(a, ph, pw):
    """Reflect-pad the trailing two axes (edge sample not repeated)."""
    a = _as_tensor(a)
    h, w = a.data.shape[-2:]
    out = np.pad(a.data,
                 [(0, 0)] * (a.data.ndim - 2) + [(ph, ph), (pw, pw)],
                 mode="reflect")

    def backward(g):
        g = _fold_reflect_axis(g, ph, h, -2)
        g = _fold_reflect_axis(g, pw, w, -1)
        return (g,)

    return Tensor(out, a.requires_grad, (a,), backward)


def _fold_reflect_axis(g, p, n, axis):
    if p == 0:
        return g
    g = np.moveaxis(g, axis, -1)
    core = g[..., p:p + n].copy()
    for q in range(1, p + 1):
        core[..., q] += g[..., p - q]
        core[..., n - 1 - q] += g[..., p + n - 1 + q]
    return np.moveaxis(core, -1, axis)


def conv2d(x, w, b=None, stride=(1, 1)):
    """Valid cross-correlation; x (B,C,H,W), w (F,C,kh,kw), b (F,)."""
    x, w = _as_tensor(x), _as_tensor(w)
    bb, c, h, ww_ = x.data.shape
    f, c2, kh, kw = w.data.shape
    if c != c2:
        raise ValueError(f"channel mismatch: input {c}, filter {c2}")
    sh, sw = stride
    oh = (h - kh) // sh + 1
    ow = (ww_ - kw) // sw + 1
    cols = K.im2col(x.data, kh, kw, sh, sw)
    wflat = w.data.reshape(f, c * kh * kw)
    out = (wflat @ cols).reshape(bb, f, oh, ow)
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        out = out + b.data.reshape(1, f, 1, 1)
        parents.append(b)

    def backward(g):
        gflat = g.reshape(bb, f, oh * ow)
        grad_w = np.tensordot(gflat, cols, axes=([0, 2], [0, 2]))
        grad_cols = wflat.T @ gflat
        grad_x = K.col2im(grad_cols, bb, c, h, ww_, kh, kw, sh, sw)
        grads = [grad_x, grad_w.reshape(w.data.shape)]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor(out, _needs(*parents), tuple(parents), backward)


def conv_transpose2x2(x, w, b=None):
    """Kernel-2 stride-2 transposed convolution; w (C,F,2,2)."""
    x, w = _as_tensor(x), _as_tensor(w)
    bb, c, h, ww_ = x.data.shape
    c2, f, kh, kw = w.data.shape
    if c != c2 or (kh, kw) != (2, 2):
        raise ValueError("conv_transpose2x2 expects w of shape (C,F,2,2)")
    out6 = np.einsum("bcij,cfhw->bfihjw", x.data, w.data)
    out = out6.reshape(bb, f, 2 * h, 2 * ww_)
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        out = out + b.data.reshape(1, f, 1, 1)
        parents.append(b)

    def backward(g):
        g6 = g.reshape(bb, f, h, 2, ww_, 2)
        grad_x = np.einsum("bfihjw,cfhw->bcij", g6, w.data)
        grad_w = np.einsum("bcij,bfihjw->cfhw", x.data, g6)
        grads = [grad_x, grad_w]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor(out, _needs(*parents), tuple(parents), backward)


def maxpool2(x):
    """2x2 stride-2 max pooling."""
    x = _as_tensor(x)
    h, w = x.data.shape[-2:]
    out, idx = K.maxpool2_forward(x.data)

    def backward(g):
        return (K.maxpool2_backward(g, idx, h, w),)

    return Tensor(out, x.requires_grad, (x,), backward)


def downscale2x(x):
    """Bicubic factor-2 decimation of the trailing two axes."""
    x = _as_tensor(x)
    h, w = x.data.shape[-2:]
    out = resample.decimate2(x.data)

    def backward(g):
        return (resample.decimate2_adjoint(g, h, w),)

    return Tensor(out, x.requires_grad, (x,), backward)
