"""Image file I/O: Radiance RGBE and PFM for HDR, PNG for LDR.

Failure modes are reported distinctly: ``UnreadableFileError`` (cannot
open/read), ``MalformedHeaderError`` (bad magic or header fields),
``TruncatedDataError`` (pixel payload ends early), and
``UnsupportedFormatError`` (recognized but out-of-scope encodings).
All writes go through a temp file and ``os.replace`` so they are
atomic.
"""

import os
import re

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import _kernels as K
from .image import HdrImage, ImageError, LdrImage, LuminanceMap

HDR_EXTENSIONS = (".hdr", ".pic", ".pfm")
LDR_EXTENSIONS = (".png",)

_RGBE_MAGIC = b"#?"
_RGBE_FORMAT = "32-bit_rle_rgbe"
_RESOLUTION_RE = re.compile(rb"^-Y (\d+) \+X (\d+)$")


class ImageIOError(Exception):
    """Base class for image file I/O failures."""


class UnreadableFileError(ImageIOError):
    pass


class MalformedHeaderError(ImageIOError):
    pass


class TruncatedDataError(ImageIOError):
    pass


class UnsupportedFormatError(ImageIOError):
    pass


def load_image(path, kind):
    """Load an image file as HdrImage (kind='hdr') or LdrImage ('ldr')."""
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if kind == "hdr":
        if ext in (".hdr", ".pic"):
            return load_rgbe(path)
        if ext == ".pfm":
            return load_pfm(path)
        raise UnsupportedFormatError(
            f"kind 'hdr' accepts {HDR_EXTENSIONS}, got {ext!r}")
    if kind == "ldr":
        if ext in LDR_EXTENSIONS:
            return load_png(path)
        raise UnsupportedFormatError(
            f"kind 'ldr' accepts {LDR_EXTENSIONS}, got {ext!r}")
    raise ValueError(f"kind must be 'hdr' or 'ldr', got {kind!r}")


def save_image(path, img):
    """Save an image by extension: .hdr/.pic (RGBE), .pfm, or .png."""
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext in (".hdr", ".pic"):
        if not isinstance(img, HdrImage):
            raise UnsupportedFormatError("RGBE output requires an HdrImage")
        save_rgbe(path, img)
    elif ext == ".pfm":
        if not isinstance(img, HdrImage):
            raise UnsupportedFormatError("PFM output requires an HdrImage")
        save_pfm(path, img)
    elif ext == ".png":
        if not isinstance(img, LdrImage):
            raise UnsupportedFormatError("PNG output requires an LdrImage")
        save_png(path, img)
    else:
        raise UnsupportedFormatError(f"no writer for extension {ext!r}")


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc


def atomic_write_bytes(path, payload):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Radiance RGBE
# ---------------------------------------------------------------------------

def load_rgbe(path):
    raw = _read_bytes(path)
    nl = raw.find(b"\n")
    if nl < 0 or not raw[:nl].startswith(_RGBE_MAGIC):
        raise MalformedHeaderError(f"{path}: missing '#?' Radiance magic")
    pos = nl + 1
    fmt = None
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise MalformedHeaderError(f"{path}: header never ends")
        line = raw[pos:nl]
        pos = nl + 1
        if line == b"":
            break
        if line.startswith(b"FORMAT="):
            fmt = line[len(b"FORMAT="):].decode("ascii", "replace")
        # other header variables (EXPOSURE, comments, ...) are ignored
    if fmt is None:
        raise MalformedHeaderError(f"{path}: no FORMAT line")
    if fmt != _RGBE_FORMAT:
        raise UnsupportedFormatError(f"{path}: unsupported FORMAT={fmt}")
    nl = raw.find(b"\n", pos)
    if nl < 0:
        raise MalformedHeaderError(f"{path}: missing resolution line")
    m = _RESOLUTION_RE.match(raw[pos:nl])
    if not m:
        raise UnsupportedFormatError(
            f"{path}: only '-Y h +X w' orientation is supported")
    height, width = int(m.group(1)), int(m.group(2))
    if height < 1 or width < 1:
        raise MalformedHeaderError(f"{path}: bad resolution {height}x{width}")
    try:
        rgbe, _ = K.rgbe_decode_scanlines(raw[nl + 1:], width, height)
    except ValueError as exc:
        if str(exc).startswith("truncated"):
            raise TruncatedDataError(f"{path}: {exc}") from exc
        raise MalformedHeaderError(f"{path}: {exc}") from exc
    return HdrImage(rgbe_to_float(rgbe))


def rgbe_to_float(rgbe):
    """Decode RGBE bytes: v = mantissa/256 * 2^(e-128); e=0 means black."""
    mant = rgbe[..., :3].astype(np.float64)
    e = rgbe[..., 3:].astype(np.int64)
    out = np.ldexp(mant, e - 136)
    out[(e == 0)[..., 0]] = 0.0
    return out


def float_to_rgbe(rgb):
    """Encode linear RGB to RGBE bytes (round-to-nearest mantissas)."""
    v = rgb.max(axis=-1)
    live = v >= 1e-32
    _, e = np.frexp(np.where(live, v, 1.0))
    scale = np.ldexp(np.ones_like(v), 8 - e)
    mant = np.rint(rgb * scale[..., None])
    # a max channel that rounds up to 256 bumps the shared exponent
    bump = mant.max(axis=-1) > 255.0
    e = e + bump
    mant = np.where(bump[..., None], np.rint(rgb * (scale / 2.0)[..., None]),
                    mant)
    e_byte = np.clip(e + 128, 1, 255)
    out = np.empty(rgb.shape[:-1] + (4,), dtype=np.uint8)
    out[..., :3] = np.clip(mant, 0, 255).astype(np.uint8)
    out[..., 3] = e_byte.astype(np.uint8)
    out[~live] = 0
    return out


def save_rgbe(path, img):
    h, w = img.height, img.width
    header = (f"#?RADIANCE\nFORMAT={_RGBE_FORMAT}\n\n"
              f"-Y {h} +X {w}\n").encode("ascii")
    rgbe = float_to_rgbe(img.data)
    use_rle = K.MIN_RLE_WIDTH <= w <= K.MAX_RLE_WIDTH
    atomic_write_bytes(path, header + K.rgbe_encode_scanlines(rgbe, use_rle))


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------

def load_pfm(path):
    raw = _read_bytes(path)
    tokens = []
    pos = 0
    while len(tokens) < 3 and pos < len(raw):
        nl = raw.find(b"\n", pos)
        if nl < 0:
            break
        tokens.extend(raw[pos:nl].split())
        pos = nl + 1
    if len(tokens) < 3:
        raise MalformedHeaderError(f"{path}: incomplete PFM header")
    magic = tokens[0]
    if magic == b"Pf":
        raise UnsupportedFormatError(f"{path}: grayscale PFM not supported")
    if magic != b"PF":
        raise MalformedHeaderError(f"{path}: bad PFM magic {magic!r}")
    try:
        width = int(tokens[1].decode("ascii"))
        height = int(tokens[2].decode("ascii"))
        scale = float(tokens[3].decode("ascii")) if len(tokens) > 3 else None
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedHeaderError(f"{path}: bad PFM header field") from exc
    if scale is None:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise MalformedHeaderError(f"{path}: missing PFM scale")
        try:
            scale = float(raw[pos:nl].decode("ascii"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedHeaderError(f"{path}: bad PFM scale") from exc
        pos = nl + 1
    if width < 1 or height < 1 or scale == 0.0:
        raise MalformedHeaderError(f"{path}: bad PFM dimensions/scale")
    dtype = "<f4" if scale < 0 else ">f4"
    need = width * height * 3 * 4
    body = raw[pos:pos + need]
    if len(body) < need:
        raise TruncatedDataError(f"{path}: PFM pixel data ends early")
    data = np.frombuffer(body, dtype=dtype).reshape(height, width, 3)
    data = data[::-1].astype(np.float64) * abs(scale)  # rows are bottom-up
    try:
        return HdrImage(data)
    except ImageError as exc:
        raise MalformedHeaderError(f"{path}: {exc}") from exc


def save_pfm(path, img):
    header = f"PF\n{img.width} {img.height}\n-1.0\n".encode("ascii")
    body = img.data[::-1].astype("<f4").tobytes()
    atomic_write_bytes(path, header + body)


# ---------------------------------------------------------------------------
# PNG (8-bit RGB in; 8-bit RGB and 16-bit grayscale out)
# ---------------------------------------------------------------------------

def load_png(path):
    if not os.path.exists(path):
        raise UnreadableFileError(f"cannot read {path}: no such file")
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormatError(
                    f"{path}: not a PNG ({im.format})")
            if im.mode not in ("RGB", "RGBA", "P", "L", "LA"):
                raise UnsupportedFormatError(
                    f"{path}: unsupported PNG mode {im.mode}")
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise MalformedHeaderError(f"{path}: not a valid image") from exc
    except OSError as exc:
        if "truncated" in str(exc).lower():
            raise TruncatedDataError(f"{path}: {exc}") from exc
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    return LdrImage(arr.astype(np.float64) / 255.0)


def quantize8(values):
    """Round-half-up quantization of [0,1] floats to uint8."""
    return np.floor(np.asarray(values) * 255.0 + 0.5).astype(np.uint8)


def save_png(path, img):
    buf = Image.fromarray(quantize8(img.data), mode="RGB")
    _atomic_pil_save(path, buf)


def save_luma_png16(path, lum):
    """Write a luminance map in [0,1] as a 16-bit grayscale PNG."""
    data = lum.data if isinstance(lum, LuminanceMap) else np.asarray(lum)
    if (data < 0).any() or (data > 1).any():
        raise ImageError("16-bit PNG output expects values in [0, 1]")
    q = np.floor(data * 65535.0 + 0.5).astype(np.uint16)
    _atomic_pil_save(path, Image.fromarray(q))  # uint16 -> 16-bit gray


def _atomic_pil_save(path, pil_image):
    tmp = f"{path}.tmp.{os.getpid()}"
    pil_image.save(tmp, format="PNG")
    os.replace(tmp, path)
