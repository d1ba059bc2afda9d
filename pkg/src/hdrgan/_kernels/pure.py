"""Pure-numpy implementations of the hot kernels.

These are the fallback versions of the routines in ``_native.pyx``; the
two backends must agree bit-for-bit (same accumulation order), which
``tests/test_kernels.py`` asserts whenever the compiled module is
available.
"""

import numpy as np

MIN_RLE_WIDTH = 8
MAX_RLE_WIDTH = 32767


# ---------------------------------------------------------------------------
# convolution lowering
# ---------------------------------------------------------------------------

def im2col(x, kh, kw, sh, sw):
    """Lower (B,C,H,W) into patch columns (B, C*kh*kw, OH*OW)."""
    b, c, h, w = x.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols)


def col2im(cols, b, c, h, w, kh, kw, sh, sw):
    """Adjoint of im2col: scatter-add columns back to (B,C,H,W)."""
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    cols6 = cols.reshape(b, c, kh, kw, oh, ow)
    gx = np.zeros((b, c, h, w), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += cols6[:, :, i, j]
    return gx


# ---------------------------------------------------------------------------
# 2x2 max pooling
# ---------------------------------------------------------------------------

def maxpool2_forward(x):
    """2x2 stride-2 max pool; returns (out, argmax in {0..3} per window)."""
    b, c, h, w = x.shape
    v = (x.reshape(b, c, h // 2, 2, w // 2, 2)
          .transpose(0, 1, 2, 4, 3, 5)
          .reshape(b, c, h // 2, w // 2, 4))
    idx = v.argmax(axis=4)  # ties resolve to the first position
    out = np.take_along_axis(v, idx[..., None], axis=4)[..., 0]
    return np.ascontiguousarray(out), idx.astype(np.uint8)


def maxpool2_backward(g, idx, h, w):
    """Route pooled gradients back to the argmax positions."""
    b, c, oh, ow = g.shape
    gx4 = np.zeros((b, c, oh, ow, 4), dtype=g.dtype)
    np.put_along_axis(gx4, idx[..., None].astype(np.intp), g[..., None], axis=4)
    return np.ascontiguousarray(
        gx4.reshape(b, c, oh, ow, 2, 2)
           .transpose(0, 1, 2, 4, 3, 5)
           .reshape(b, c, h, w))


# ---------------------------------------------------------------------------
# Radiance RGBE run-length coding
# ---------------------------------------------------------------------------

def rgbe_decode_scanlines(payload, width, height):
    """Decode RGBE scanline payload to a (height, width, 4) uint8 array.

    Handles both new-style per-channel RLE and old-style flat scanlines
    with (1,1,1,count) repeat codes.  Raises ValueError("truncated ...")
    when the payload ends early and ValueError("corrupt ...") on
    malformed run structure.
    """
    buf = np.frombuffer(payload, dtype=np.uint8)
    n = buf.size
    out = np.empty((height, width, 4), dtype=np.uint8)
    pos = 0
    row = 0
    while row < height:
        if pos + 4 > n:
            raise ValueError("truncated scanline header")
        b0, b1, b2, b3 = buf[pos], buf[pos + 1], buf[pos + 2], buf[pos + 3]
        if b0 == 2 and b1 == 2 and ((int(b2) << 8) | int(b3)) == width \
                and MIN_RLE_WIDTH <= width <= MAX_RLE_WIDTH:
            pos += 4
            for ch in range(4):
                i = 0
                while i < width:
                    if pos >= n:
                        raise ValueError("truncated run-length data")
                    code = int(buf[pos])
                    pos += 1
                    if code > 128:
                        count = code - 128
                        if i + count > width or pos >= n:
                            raise ValueError("corrupt run-length data"
                                             if i + count > width
                                             else "truncated run-length data")
                        out[row, i:i + count, ch] = buf[pos]
                        pos += 1
                    else:
                        count = code
                        if count == 0 or i + count > width:
                            raise ValueError("corrupt run-length data")
                        if pos + count > n:
                            raise ValueError("truncated run-length data")
                        out[row, i:i + count, ch] = buf[pos:pos + count]
                        pos += count
                    i += count
            row += 1
        else:
            # old-style flat scanline, possibly with repeat codes
            i = 0
            shift = 0
            prev = None
            while i < width:
                if pos + 4 > n:
                    raise ValueError("truncated pixel data")
                px = buf[pos:pos + 4]
                pos += 4
                if px[0] == 1 and px[1] == 1 and px[2] == 1:
                    if prev is None:
                        raise ValueError("corrupt repeat code")
                    count = int(px[3]) << shift
                    if i + count > width:
                        raise ValueError("corrupt repeat code")
                    out[row, i:i + count] = prev
                    i += count
                    shift += 8
                else:
                    out[row, i] = px
                    prev = px
                    i += 1
                    shift = 0
            row += 1
    return out, pos


def rgbe_encode_scanlines(rgbe, use_rle):
    """Encode a (height, width, 4) uint8 array to scanline bytes."""
    height, width, _ = rgbe.shape
    if not use_rle:
        return rgbe.tobytes()
    chunks = []
    header = bytearray([2, 2, (width >> 8) & 0xFF, width & 0xFF])
    for row in range(height):
        chunks.append(bytes(header))
        for ch in range(4):
            chunks.append(_encode_channel_rle(rgbe[row, :, ch]))
    return b"".join(chunks)


def _encode_channel_rle(vals):
    """Run-length encode one channel of one scanline (Radiance packets)."""
    w = vals.size
    out = bytearray()
    i = 0
    while i < w:
        # measure the run starting at i
        run = 1
        while i + run < w and run < 127 and vals[i + run] == vals[i]:
            run += 1
        if run >= 4:
            out.append(128 + run)
            out.append(int(vals[i]))
            i += run
        else:
            # literal segment: up to the next run of >= 4, max 128 bytes
            j = i
            while j < w and j - i < 128:
                run = 1
                while j + run < w and run < 4 and vals[j + run] == vals[j]:
                    run += 1
                if run >= 4:
                    break
                j = min(j + run, i + 128)  # never overshoot the packet cap
            out.append(j - i)
            out.extend(vals[i:j].tobytes())
            i = j
    return bytes(out)
