"""Dataset scanning/splitting, crop-pair augmentation, and synthetic
scene generation for desk-scale runs.

``synth_hdr`` composes a smooth log-space illumination field, geometric
reflectance patches, and a few small bright emitters, then exponentiates
so the max/min luminance ratio hits the requested dynamic range.  The
output is quantized to the float32 grid, which keeps exact-scaling
identities (e.g. 100 * image) exact in float64 arithmetic.
"""

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .image import HdrImage, LdrImage, luminance, LUMA_R, LUMA_G, LUMA_B
from .resample import resize_bicubic

_EXTENSIONS = {"hdr": (".hdr", ".pic", ".pfm"), "ldr": (".png",)}
_MAGIC = {
    ".hdr": b"#?", ".pic": b"#?", ".pfm": b"PF",
    ".png": b"\x89PNG\r\n\x1a\n",
}


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    seed: int
    entries: tuple  # of (relative path, kind, split)

    def __post_init__(self):
        paths = [e[0] for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest contains duplicate paths")
        for _, kind, split in self.entries:
            if kind not in ("hdr", "ldr") or split not in ("train", "test"):
                raise ValueError(f"bad manifest entry kind={kind} "
                                 f"split={split}")

    def paths(self, split):
        return [os.path.join(self.root, p) for p, _, s in self.entries
                if s == split]


def scan_dataset(root, kind, split_seed):
    """Recursively scan ``root`` for images of ``kind`` and split them
    50/50 (ties go to train) with a seed-deterministic shuffle."""
    if kind not in _EXTENSIONS:
        raise ValueError(f"kind must be 'hdr' or 'ldr', got {kind!r}")
    if not os.path.isdir(root):
        raise ValueError(f"{root}: not a directory")
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            ext = os.path.splitext(name)[1].lower()
            if ext not in _EXTENSIONS[kind]:
                continue
            full = os.path.join(dirpath, name)
            if not _readable(full, ext):
                warnings.warn(f"skipping unreadable entry {full}")
                continue
            found.append(os.path.relpath(full, root))
    if not found:
        raise ValueError(f"{root}: no readable {kind} images found")
    rng = np.random.default_rng(split_seed)
    order = rng.permutation(len(found))
    n_train = math.ceil(len(found) / 2)
    split_of = {}
    for rank, idx in enumerate(order):
        split_of[found[idx]] = "train" if rank < n_train else "test"
    entries = tuple((p, kind, split_of[p]) for p in found)
    return DatasetManifest(root=os.fspath(root), seed=split_seed,
                           entries=entries)


def _readable(path, ext):
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(_MAGIC[ext]))
    except OSError:
        return False
    return head == _MAGIC[ext] or (ext == ".pfm" and head[:2] == b"PF")


def write_manifest(path, manifest):
    from .hdrio import atomic_write_bytes
    lines = [f"# split_seed={manifest.seed}"]
    lines += [f"{p}\t{k}\t{s}" for p, k, s in manifest.entries]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_manifest(path, root=None):
    seed = 0
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if "split_seed=" in line:
                    seed = int(line.split("split_seed=")[1])
                continue
            p, kind, split = line.split("\t")
            entries.append((p, kind, split))
    return DatasetManifest(root=os.fspath(root) if root else
                           os.path.dirname(os.path.abspath(path)),
                           seed=seed, entries=tuple(entries))


def augment_crop_pair(img, target=256):
    """Split an image into two halves along its longer axis, center-crop
    each to a square, and rescale both to target x target."""
    data = img.data
    h, w = data.shape[:2]
    if h < target or w < target:
        raise ValueError(f"image {h}x{w} is smaller than target {target}")
    if w >= h:
        halves = (data[:, :w // 2], data[:, w // 2:])
    else:
        halves = (data[:h // 2, :], data[h // 2:, :])
    out = []
    for half in halves:
        hh, hw = half.shape[:2]
        side = min(hh, hw)
        y0 = (hh - side) // 2
        x0 = (hw - side) // 2
        square = half[y0:y0 + side, x0:x0 + side]
        resized = resize_bicubic(square, target, target)
        # clamp bicubic overshoot so value ranges never leave the source
        out.append(np.clip(resized, square.min(), square.max()))
    cls = type(img)
    return cls(out[0]), cls(out[1])


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

def _smooth_field(rng, width, height, n_blobs):
    """Sum of random broad Gaussian blobs, normalized to [0, 1]."""
    yy, xx = np.meshgrid(np.linspace(0, 1, height), np.linspace(0, 1, width),
                         indexing="ij")
    field = np.zeros((height, width))
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0, 1, 2)
        sig = rng.uniform(0.15, 0.5)
        amp = rng.uniform(-1.0, 1.0)
        field += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2)
                              / (2 * sig ** 2))
    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)


def _reflectance(rng, width, height):
    """Piecewise-constant rectangles over a mid-gray base, in [0, 1]."""
    refl = np.full((height, width), 0.45)
    for _ in range(rng.integers(6, 13)):
        x0 = rng.integers(0, width)
        y0 = rng.integers(0, height)
        bw = rng.integers(max(2, width // 16), max(3, width // 3))
        bh = rng.integers(max(2, height // 16), max(3, height // 3))
        refl[y0:y0 + bh, x0:x0 + bw] = rng.uniform(0.1, 1.0)
    return refl


def synth_hdr(seed, width, height, dynamic_range_target=1e5):
    """Deterministic synthetic HDR scene with a controlled dynamic range."""
    if width < 32 or height < 32:
        raise ValueError("synthetic scenes must be at least 32x32")
    rng = np.random.default_rng(seed)
    illum = _smooth_field(rng, width, height, int(rng.integers(2, 5)))
    refl = _reflectance(rng, width, height)
    # reflectance modulates the mid-range of the log-luminance field
    loglum = 0.72 * illum + 0.2 * refl
    for _ in range(rng.integers(1, 5)):  # small bright emitters
        cx = rng.integers(0, width)
        cy = rng.integers(0, height)
        r = int(rng.integers(1, max(2, min(width, height) // 16)))
        yy, xx = np.ogrid[:height, :width]
        loglum[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = 1.0
    lo, hi = loglum.min(), loglum.max()
    loglum = (loglum - lo) / (hi - lo)
    y = np.exp(loglum * math.log(dynamic_range_target))
    y *= 10.0 ** rng.uniform(-2.0, 2.0)
    rgb = _colorize(rng, y, width, height)
    return HdrImage(rgb.astype(np.float32).astype(np.float64))


def _colorize(rng, y, width, height):
    """Tint luminance with smooth chroma fields of unit luma weight."""
    chroma = np.stack([
        0.5 + 0.5 * _smooth_field(rng, width, height, 2) for _ in range(3)
    ], axis=2)
    norm = (LUMA_R * chroma[:, :, 0] + LUMA_G * chroma[:, :, 1]
            + LUMA_B * chroma[:, :, 2])
    return y[:, :, None] * chroma / norm[:, :, None]


def synth_ldr(seed, width, height):
    """Deterministic synthetic native-LDR photograph stand-in."""
    if width < 32 or height < 32:
        raise ValueError("synthetic scenes must be at least 32x32")
    rng = np.random.default_rng(seed)
    illum = _smooth_field(rng, width, height, int(rng.integers(2, 5)))
    refl = _reflectance(rng, width, height)
    y = (0.25 + 0.75 * illum) * (0.2 + 0.8 * refl)
    y += 0.04 * _texture(rng, width, height)  # fine surface grain
    y = (np.clip(y, 0.0, None) / (1.0 + y)) * 2.0  # photographic shoulder
    y = np.clip(y, 0.0, 1.0) ** (1.0 / 2.2)
    rgb = np.clip(_colorize(rng, y, width, height), 0.0, 1.0)
    return LdrImage(rgb)


def _texture(rng, width, height):
    """Zero-mean high-frequency grain (lightly smoothed white noise)."""
    noise = rng.normal(0.0, 1.0, (height, width))
    acc = noise.copy()
    for shift in (1, -1):
        acc += np.roll(noise, shift, axis=0) + np.roll(noise, shift, axis=1)
    return acc / 5.0


def synth_dataset(root, kind, count, size, seed, dynamic_range_target=1e5):
    """Write ``count`` synthetic images under ``root``; returns paths."""
    from .hdrio import save_image
    os.makedirs(root, exist_ok=True)
    paths = []
    for i in range(count):
        if kind == "hdr":
            img = synth_hdr(seed + i, size, size, dynamic_range_target)
            path = os.path.join(root, f"synth_{i:04d}.hdr")
        elif kind == "ldr":
            img = synth_ldr(seed + i, size, size)
            path = os.path.join(root, f"synth_{i:04d}.png")
        else:
            raise ValueError(f"kind must be 'hdr' or 'ldr', got {kind!r}")
        save_image(path, img)
        paths.append(path)
    return paths
