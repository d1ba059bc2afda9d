# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels.

Semantics (including accumulation order and error messages) mirror
``pure.py`` exactly so results are bit-identical across backends.
"""

import numpy as np

cimport cython
from libc.string cimport memcpy

MIN_RLE_WIDTH = 8
MAX_RLE_WIDTH = 32767

ctypedef fused floating:
    float
    double


# ---------------------------------------------------------------------------
# convolution lowering
# ---------------------------------------------------------------------------

def im2col(x, int kh, int kw, int sh, int sw):
    """Lower (B,C,H,W) into patch columns (B, C*kh*kw, OH*OW)."""
    return _im2col_impl(np.ascontiguousarray(x), kh, kw, sh, sw)


def _im2col_impl(const floating[:, :, :, ::1] x, int kh, int kw, int sh, int sw):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - kh) // sh + 1
    cdef Py_ssize_t ow = (w - kw) // sw + 1
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((b, c * kh * kw, oh * ow), dtype=dtype)
    cdef floating[:, :, ::1] out = out_arr
    cdef Py_ssize_t bi, ci, i, j, oy, ox, row
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ci * kh + i) * kw + j
                        if sw == 1:
                            # unit stride: each output row is one span
                            for oy in range(oh):
                                memcpy(&out[bi, row, oy * ow],
                                       &x[bi, ci, oy * sh + i, j],
                                       ow * sizeof(floating))
                        else:
                            for oy in range(oh):
                                for ox in range(ow):
                                    out[bi, row, oy * ow + ox] = \
                                        x[bi, ci, oy * sh + i, ox * sw + j]
    return out_arr


def col2im(cols, Py_ssize_t b, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
           int kh, int kw, int sh, int sw):
    """Adjoint of im2col: scatter-add columns back to (B,C,H,W)."""
    return _col2im_impl(np.ascontiguousarray(cols), b, c, h, w,
                        kh, kw, sh, sw)


def _col2im_impl(const floating[:, :, ::1] cols, Py_ssize_t b, Py_ssize_t c,
                 Py_ssize_t h, Py_ssize_t w, int kh, int kw, int sh, int sw):
    cdef Py_ssize_t oh = (h - kh) // sh + 1
    cdef Py_ssize_t ow = (w - kw) // sw + 1
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    gx_arr = np.zeros((b, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t bi, ci, i, j, oy, ox, row
    with nogil:
        # offset-major accumulation order matches the pure backend
        for i in range(kh):
            for j in range(kw):
                for bi in range(b):
                    for ci in range(c):
                        row = (ci * kh + i) * kw + j
                        for oy in range(oh):
                            for ox in range(ow):
                                gx[bi, ci, oy * sh + i, ox * sw + j] += \
                                    cols[bi, row, oy * ow + ox]
    return gx_arr


# ---------------------------------------------------------------------------
# 2x2 max pooling
# ---------------------------------------------------------------------------

def maxpool2_forward(x):
    """2x2 stride-2 max pool; returns (out, argmax in {0..3})."""
    return _maxpool2_forward_impl(np.ascontiguousarray(x))


def _maxpool2_forward_impl(const floating[:, :, :, ::1] x):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t oh = x.shape[2] // 2, ow = x.shape[3] // 2
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((b, c, oh, ow), dtype=dtype)
    idx_arr = np.empty((b, c, oh, ow), dtype=np.uint8)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef unsigned char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t bi, ci, oy, ox
    cdef int p, best_p
    cdef floating v, best
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        best = x[bi, ci, 2 * oy, 2 * ox]
                        best_p = 0
                        for p in range(1, 4):
                            v = x[bi, ci, 2 * oy + (p >> 1),
                                  2 * ox + (p & 1)]
                            if v > best:
                                best = v
                                best_p = p
                        out[bi, ci, oy, ox] = best
                        idx[bi, ci, oy, ox] = <unsigned char> best_p
    return out_arr, idx_arr


def maxpool2_backward(g, idx, Py_ssize_t h, Py_ssize_t w):
    """Route pooled gradients back to the argmax positions."""
    return _maxpool2_backward_impl(np.ascontiguousarray(g),
                                   np.ascontiguousarray(idx), h, w)


def _maxpool2_backward_impl(const floating[:, :, :, ::1] g,
                            const unsigned char[:, :, :, ::1] idx,
                            Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t b = g.shape[0], c = g.shape[1]
    cdef Py_ssize_t oh = g.shape[2], ow = g.shape[3]
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    gx_arr = np.zeros((b, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t bi, ci, oy, ox
    cdef int p
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        p = idx[bi, ci, oy, ox]
                        gx[bi, ci, 2 * oy + (p >> 1), 2 * ox + (p & 1)] = \
                            g[bi, ci, oy, ox]
    return gx_arr


# ---------------------------------------------------------------------------
# Radiance RGBE run-length coding
# ---------------------------------------------------------------------------

def rgbe_decode_scanlines(payload, Py_ssize_t width, Py_ssize_t height):
    """Decode RGBE scanline payload to ((height, width, 4) uint8, pos)."""
    cdef const unsigned char[::1] buf = payload
    cdef Py_ssize_t n = buf.shape[0]
    out_arr = np.empty((height, width, 4), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    cdef Py_ssize_t pos = 0, row = 0, i, k, count, shift
    cdef int ch, code, has_prev
    cdef unsigned char b0, b1, b2, b3
    cdef unsigned char prev0 = 0, prev1 = 0, prev2 = 0, prev3 = 0
    while row < height:
        if pos + 4 > n:
            raise ValueError("truncated scanline header")
        b0 = buf[pos]
        b1 = buf[pos + 1]
        b2 = buf[pos + 2]
        b3 = buf[pos + 3]
        if b0 == 2 and b1 == 2 and ((<int> b2 << 8) | <int> b3) == width \
                and MIN_RLE_WIDTH <= width <= MAX_RLE_WIDTH:
            pos += 4
            for ch in range(4):
                i = 0
                while i < width:
                    if pos >= n:
                        raise ValueError("truncated run-length data")
                    code = buf[pos]
                    pos += 1
                    if code > 128:
                        count = code - 128
                        if i + count > width:
                            raise ValueError("corrupt run-length data")
                        if pos >= n:
                            raise ValueError("truncated run-length data")
                        for k in range(count):
                            out[row, i + k, ch] = buf[pos]
                        pos += 1
                    else:
                        count = code
                        if count == 0 or i + count > width:
                            raise ValueError("corrupt run-length data")
                        if pos + count > n:
                            raise ValueError("truncated run-length data")
                        for k in range(count):
                            out[row, i + k, ch] = buf[pos + k]
                        pos += count
                    i += count
            row += 1
        else:
            i = 0
            shift = 0
            has_prev = 0
            while i < width:
                if pos + 4 > n:
                    raise ValueError("truncated pixel data")
                b0 = buf[pos]
                b1 = buf[pos + 1]
                b2 = buf[pos + 2]
                b3 = buf[pos + 3]
                pos += 4
                if b0 == 1 and b1 == 1 and b2 == 1:
                    if not has_prev:
                        raise ValueError("corrupt repeat code")
                    count = (<Py_ssize_t> b3) << shift
                    if i + count > width:
                        raise ValueError("corrupt repeat code")
                    for k in range(count):
                        out[row, i + k, 0] = prev0
                        out[row, i + k, 1] = prev1
                        out[row, i + k, 2] = prev2
                        out[row, i + k, 3] = prev3
                    i += count
                    shift += 8
                else:
                    out[row, i, 0] = b0
                    out[row, i, 1] = b1
                    out[row, i, 2] = b2
                    out[row, i, 3] = b3
                    prev0 = b0
                    prev1 = b1
                    prev2 = b2
                    prev3 = b3
                    has_prev = 1
                    i += 1
                    shift = 0
            row += 1
    return out_arr, pos


def rgbe_encode_scanlines(rgbe, use_rle):
    """Encode a (height, width, 4) uint8 array to scanline bytes."""
    cdef const unsigned char[:, :, ::1] data = np.ascontiguousarray(rgbe)
    cdef Py_ssize_t height = data.shape[0], width = data.shape[1]
    if not use_rle:
        return np.ascontiguousarray(rgbe).tobytes()
    out = bytearray()
    cdef Py_ssize_t row
    cdef int ch
    header = bytes([2, 2, (width >> 8) & 0xFF, width & 0xFF])
    for row in range(height):
        out += header
        for ch in range(4):
            _encode_channel(out, data, row, ch, width)
    return bytes(out)


cdef void _encode_channel(out, const unsigned char[:, :, ::1] data,
                          Py_ssize_t row, int ch, Py_ssize_t w):
    cdef Py_ssize_t i = 0, j, run
    cdef unsigned char v
    while i < w:
        run = 1
        while i + run < w and run < 127 and \
                data[row, i + run, ch] == data[row, i, ch]:
            run += 1
        if run >= 4:
            out.append(128 + run)
            out.append(data[row, i, ch])
            i += run
        else:
            j = i
            while j < w and j - i < 128:
                run = 1
                while j + run < w and run < 4 and \
                        data[row, j + run, ch] == data[row, j, ch]:
                    run += 1
                if run >= 4:
                    break
                j += run
                if j - i > 128:  # never overshoot the packet cap
                    j = i + 128
            out.append(j - i)
            out += bytes(data[row, i:j, ch])
            i = j
