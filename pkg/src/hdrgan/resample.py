"""Bicubic resampling: factor-2^k decimation and general resizing.

The decimation path is the Catmull-Rom (a = -0.5) kernel stretched to
half-band, applied separably with reflect padding (edge sample not
repeated).  Factor 4 is two successive factor-2 passes with the same
kernel.  ``decimate2_adjoint`` is the exact transpose of ``decimate2``,
which is what backpropagation through the multi-scale losses needs.
"""

import numpy as np

from .image import LuminanceMap

_PAD = 3

# Catmull-Rom kernel stretched by 2 and sampled at the 8 contributing
# offsets of a factor-2 decimation; taps sum to exactly 1.
_TAPS = np.array([
    -0.01171875, -0.03515625, 0.11328125, 0.43359375,
    0.43359375, 0.11328125, -0.03515625, -0.01171875,
])


def _cubic(x, a=-0.5):
    """Catmull-Rom weight function on |x| (vectorized)."""
    x = np.abs(x)
    w = np.zeros_like(x)
    near = x <= 1.0
    far = (x > 1.0) & (x < 2.0)
    w[near] = ((a + 2.0) * x[near] - (a + 3.0)) * x[near] ** 2 + 1.0
    w[far] = a * (((x[far] - 5.0) * x[far] + 8.0) * x[far] - 4.0)
    return w


def _decimate2_last(x):
    """Halve the last axis with the half-band kernel (reflect padding)."""
    n = x.shape[-1]
    if n % 2 != 0:
        raise ValueError(f"axis length {n} is not divisible by 2")
    if n < 4:
        raise ValueError(f"axis length {n} is too small to decimate")
    pad = [(0, 0)] * (x.ndim - 1) + [(_PAD, _PAD)]
    xp = np.pad(x, pad, mode="reflect")
    oh = n // 2
    taps = _TAPS.astype(x.dtype, copy=False)
    out = np.zeros(x.shape[:-1] + (oh,), dtype=x.dtype)
    for t in range(8):
        out += taps[t] * xp[..., t:t + 2 * oh - 1:2]
    return out


def _decimate2_adjoint_last(g, n):
    """Transpose of ``_decimate2_last`` for an input of length ``n``."""
    oh = g.shape[-1]
    taps = _TAPS.astype(g.dtype, copy=False)
    gp = np.zeros(g.shape[:-1] + (n + 2 * _PAD,), dtype=g.dtype)
    for t in range(8):
        gp[..., t:t + 2 * oh - 1:2] += taps[t] * g
    gx = gp[..., _PAD:_PAD + n].copy()
    for p in range(_PAD):
        gx[..., _PAD - p] += gp[..., p]
        gx[..., n - 2 - p] += gp[..., _PAD + n + p]
    return gx


def decimate2(x):
    """Bicubic x2 decimation of the trailing two axes of ``x``."""
    x = _decimate2_last(x)
    x = _decimate2_last(np.moveaxis(x, -2, -1))
    return np.moveaxis(x, -2, -1)


def decimate2_adjoint(g, h, w):
    """Transpose of ``decimate2`` for a trailing-shape (h, w) input."""
    g = np.moveaxis(_decimate2_adjoint_last(np.moveaxis(g, -2, -1), h), -2, -1)
    return _decimate2_adjoint_last(g, w)


def downscale(lum, k):
    """Bicubic 2^k decimation of a luminance map, k in {0, 1, 2}."""
    if k not in (0, 1, 2):
        raise ValueError(f"downscale level must be 0, 1, or 2, got {k!r}")
    data = lum.data if isinstance(lum, LuminanceMap) else np.asarray(lum)
    h, w = data.shape[-2:]
    if h % (1 << k) or w % (1 << k):
        raise ValueError(
            f"dimensions {h}x{w} are not divisible by {1 << k}")
    out = data.copy() if k == 0 else data
    for _ in range(k):
        out = decimate2(out)
    return LuminanceMap(out) if isinstance(lum, LuminanceMap) else out


def resize_bicubic(arr, out_h, out_w):
    """Separable Catmull-Rom resize of the leading two axes.

    Downscaling stretches the kernel for antialiasing; weight rows are
    normalized so constants are preserved exactly.  Works on (h, w) and
    (h, w, c) arrays.
    """
    arr = np.asarray(arr, dtype=np.float64)
    wh = _resize_matrix(arr.shape[0], out_h)
    ww = _resize_matrix(arr.shape[1], out_w)
    out = np.tensordot(wh, arr, axes=(1, 0))
    out = np.tensordot(ww, out, axes=(1, 1))
    return np.swapaxes(out, 0, 1) if arr.ndim >= 2 else out


def _resize_matrix(n_in, n_out):
    """Dense (n_out, n_in) row-normalized bicubic interpolation matrix."""
    if n_in == n_out:
        return np.eye(n_in)
    scale = n_in / n_out
    stretch = max(scale, 1.0)
    support = 2.0 * stretch
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    first = np.ceil(centers - support).astype(np.int64)
    ntaps = int(np.floor(2.0 * support)) + 2
    idx = first[:, None] + np.arange(ntaps)[None, :]
    w = _cubic((idx - centers[:, None]) / stretch)
    w /= w.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), ntaps)
    np.add.at(mat, (rows, _reflect_index(idx, n_in).ravel()), w.ravel())
    return mat


def _reflect_index(i, n):
    """Mirror out-of-range indices (edge sample not repeated)."""
    if n == 1:
        return np.zeros_like(i)
    period = 2 * (n - 1)
    i = np.abs(i) % period
    return np.where(i >= n, period - i, i)
