"""Image containers and pixel-level color operations.

All containers carry float64 channel-last arrays and are immutable
after construction; every operation here is pure, so concurrent use is
safe.
"""

import numpy as np

# Rec.601 luma weights.  The blue coefficient is derived from the other
# two so the three weights sum to exactly 1.0 in float64, which keeps
# the luma of a unit-white pixel at exactly 1.0.
LUMA_R = 0.299
LUMA_G = 0.587
LUMA_B = 1.0 - (LUMA_R + LUMA_G)

# guard for the chromaticity ratio C/Y at black pixels
EPS_DIV = 1e-9


class ImageError(ValueError):
    """Invalid image payload (shape, range, or finiteness)."""


def _freeze(obj, name, arr):
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


class HdrImage:
    """Linear-light RGB raster; non-negative floats of arbitrary scale."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImageError(f"HDR image must be (h, w, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageError("image dimensions must be >= 1")
        if not np.isfinite(arr).all():
            raise ImageError("HDR image contains non-finite values")
        if (arr < 0).any():
            raise ImageError("HDR image contains negative values")
        _freeze(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


class LdrImage:
    """Display-referred RGB raster with all values in [0, 1]."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImageError(f"LDR image must be (h, w, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageError("image dimensions must be >= 1")
        if not np.isfinite(arr).all():
            raise ImageError("LDR image contains non-finite values")
        if (arr < 0).any() or (arr > 1).any():
            raise ImageError("LDR image values must lie in [0, 1]")
        _freeze(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


class LuminanceMap:
    """Single-channel float field (raw luma, compressed luma, or network
    output, depending on where it sits in the pipeline)."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ImageError(f"luminance map must be (h, w), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageError("map dimensions must be >= 1")
        if not np.isfinite(arr).all():
            raise ImageError("luminance map contains non-finite values")
        _freeze(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


def luminance(img):
    """Rec.601 luma of an RGB image, Y = 0.299 R + 0.587 G + 0.114 B."""
    if not isinstance(img, (HdrImage, LdrImage)):
        raise TypeError("luminance expects an HdrImage or LdrImage")
    d = img.data
    y = LUMA_R * d[:, :, 0] + LUMA_G * d[:, :, 1] + LUMA_B * d[:, :, 2]
    return LuminanceMap(y)


def reproduce_color(hdr, y, out_luma, s):
    """Rebuild an RGB rendition from a tone-mapped luma.

    Each channel is mapped independently through
    ``(C / Y)**s * out_luma`` with the chromaticity ratio guarded at
    black pixels (Y <= EPS_DIV yields a zero ratio denominator guard),
    and the result clamped to [0, 1].
    """
    if not (hdr.height == y.height == out_luma.height
            and hdr.width == y.width == out_luma.width):
        raise ImageError("reproduce_color inputs must share dimensions")
    if not (0.0 < s <= 1.0):
        raise ImageError(f"saturation s must lie in (0, 1], got {s}")
    if (out_luma.data < 0).any() or (out_luma.data > 1).any():
        raise ImageError("output luma must lie in [0, 1]")
    ratio = hdr.data / np.maximum(y.data, EPS_DIV)[:, :, None]
    out = ratio ** s * out_luma.data[:, :, None]
    return LdrImage(np.clip(out, 0.0, 1.0))
