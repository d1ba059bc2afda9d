"""pixFID: a Fréchet distance over per-cell spatial features.

Instead of one feature vector per image, each image contributes an
8x8 grid of local feature samples (64 per image), so multivariate
Gaussians can be fitted stably from small image sets.  Two extractors
are provided: a hermetic stub (seeded random filter bank over 32x32
tiles) used by all tests, and an optional adapter onto a pretrained
Inception-v3 classifier for parity with published pipelines.  A
blur/noise disturbance harness supports sensitivity studies.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .image import HdrImage, LdrImage, LuminanceMap, luminance
from .resample import resize_bicubic

EPS_PSD = 1e-6


@dataclass(frozen=True)
class FeatureStats:
    """Gaussian moments of a feature-sample population."""

    mean: np.ndarray
    cov: np.ndarray
    n_samples: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be (d,), cov must be (d, d)")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ValueError("feature stats contain non-finite values")
        if np.abs(cov - cov.T).max() > 1e-9:
            raise ValueError("covariance must be symmetric")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def _as_luma_unit(img):
    """Luma array in [0, 1] from any image container or array."""
    if isinstance(img, (HdrImage, LdrImage)):
        y = luminance(img).data
    elif isinstance(img, LuminanceMap):
        y = img.data
    else:
        arr = np.asarray(img, dtype=np.float64)
        y = arr if arr.ndim == 2 else luminance(LdrImage(arr)).data
    peak = y.max()
    return y / peak if peak > 1.0 else y


class StubFeatureExtractor:
    """Hermetic deterministic extractor: a fixed seeded bank of 64
    zero-mean 5x5 filters applied to the luma resized to 256x256, with
    mean absolute responses pooled per 32x32 tile onto an 8x8 grid."""

    name = "stub"
    grid = 8
    tile = 32
    feature_dim = 64

    def __init__(self, seed=0):
        rng = np.random.default_rng(seed)
        bank = rng.normal(0.0, 1.0, (self.feature_dim, 1, 5, 5))
        bank -= bank.mean(axis=(2, 3), keepdims=True)
        bank /= np.sqrt((bank ** 2).sum(axis=(2, 3), keepdims=True))
        self.bank = bank

    def features(self, img):
        side = self.grid * self.tile
        y = _as_luma_unit(img)
        if y.shape != (side, side):
            y = resize_bicubic(y, side, side)
        ypad = np.pad(y, 2, mode="reflect")[None, None]
        cols = K.im2col(ypad, 5, 5, 1, 1)
        resp = np.abs(self.bank.reshape(self.feature_dim, 25) @ cols[0])
        resp = resp.reshape(self.feature_dim, side, side)
        pooled = resp.reshape(self.feature_dim, self.grid, self.tile,
                              self.grid, self.tile).mean(axis=(2, 4))
        return pooled.reshape(self.feature_dim, -1).T.copy()


class InceptionFeatureExtractor:
    """Adapter onto an externally supplied pretrained Inception-v3.

    Reads the Mixed_6e block output (17x17x768 at 299x299 input) and
    average-pools it onto the canonical 8x8 grid, giving 64 samples of
    dimension 768 per image.  Requires torch + torchvision and a local
    weights file; the stub extractor covers hermetic use.
    """

    name = "inception"
    grid = 8
    feature_dim = 768

    def __init__(self, weights_path=None):
        try:
            import torch
            import torchvision
        except ImportError as exc:
            raise RuntimeError(
                "the inception extractor requires torch and torchvision; "
                "install them and pass a weights file, or use "
                "--extractor stub") from exc
        if not weights_path:
            raise RuntimeError("the inception extractor needs a local "
                               "weights file (--weights PATH)")
        self._torch = torch
        net = torchvision.models.inception_v3(weights=None, aux_logits=True,
                                              init_weights=False)
        state = torch.load(weights_path, map_location="cpu")
        net.load_state_dict(state)
        net.eval()
        self._net = net
        self._acts = {}
        net.Mixed_6e.register_forward_hook(
            lambda mod, inp, out: self._acts.__setitem__("m6e", out))

    def features(self, img):
        torch = self._torch
        if isinstance(img, (HdrImage, LdrImage)):
            rgb = img.data
        else:
            rgb = np.asarray(img, dtype=np.float64)
        peak = rgb.max()
        if peak > 1.0:
            rgb = rgb / peak
        rgb = resize_bicubic(rgb, 299, 299)
        x = torch.from_numpy(
            np.moveaxis(rgb, 2, 0)[None].astype(np.float32))
        x = (x - 0.5) * 2.0  # inception's [-1, 1] input convention
        with torch.no_grad():
            self._net(x)
        act = self._acts["m6e"][0]  # (768, 17, 17)
        pooled = torch.nn.functional.adaptive_avg_pool2d(act, self.grid)
        return pooled.reshape(self.feature_dim, -1).T.numpy().astype(
            np.float64)


def extract_features(extractor, images):
    """Stack per-cell features of all images: (n_images * grid^2, d),
    image-major with row-major cells."""
    if not images:
        raise ValueError("need at least one image")
    rows = []
    for img in images:
        feats = np.asarray(extractor.features(img), dtype=np.float64)
        expected = (extractor.grid ** 2, extractor.feature_dim)
        if feats.shape != expected:
            raise ValueError(f"extractor returned {feats.shape}, "
                             f"expected {expected}")
        rows.append(feats)
    return np.concatenate(rows, axis=0)


def gaussian_stats(samples):
    """Sample mean and unbiased covariance of feature rows."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples to fit a Gaussian")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return FeatureStats(mean=mean, cov=cov, n_samples=n)


def frechet_distance(a, b):
    """Closed-form Fréchet distance between two Gaussians.

    The matrix square root is taken by symmetric eigendecomposition of
    A^1/2 B A^1/2 with negative eigenvalues clipped at zero; both
    covariances get an EPS_PSD ridge first.  The result is clamped at
    zero (it can only undershoot by numerical noise).
    """
    if a.mean.shape != b.mean.shape:
        raise ValueError("feature dimensions differ")
    eye = np.eye(a.mean.size)
    ca = a.cov + EPS_PSD * eye
    cb = b.cov + EPS_PSD * eye
    wa, va = np.linalg.eigh(ca)
    a_half = (va * np.sqrt(np.clip(wa, 0.0, None))) @ va.T
    inner = a_half @ cb @ a_half
    wm = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    tr_sqrt = np.sqrt(np.clip(wm, 0.0, None)).sum()
    dist = (((a.mean - b.mean) ** 2).sum()
            + np.trace(ca) + np.trace(cb) - 2.0 * tr_sqrt)
    if dist < -1e-6:
        raise FloatingPointError(f"Fréchet distance collapsed to {dist}")
    return float(max(dist, 0.0))


def pixfid_score(set_a, set_b, extractor):
    """Fréchet distance between the Gaussian feature moments of two
    image sets; symmetric in its arguments."""
    if len(set_a) < 2 or len(set_b) < 2:
        raise ValueError("each image set needs at least 2 images")
    stats_a = gaussian_stats(extract_features(extractor, set_a))
    stats_b = gaussian_stats(extract_features(extractor, set_b))
    return frechet_distance(stats_a, stats_b)


# ---------------------------------------------------------------------------
# disturbance harness
# ---------------------------------------------------------------------------

def gaussian_blur(img, radius):
    """Separable Gaussian blur (sigma = radius) with reflect padding."""
    if radius <= 0:
        raise ValueError("blur radius must be positive")
    half = max(1, int(np.ceil(3.0 * radius)))
    xs = np.arange(-half, half + 1, dtype=np.float64)
    kern = np.exp(-0.5 * (xs / radius) ** 2)
    kern /= kern.sum()
    data = img.data if isinstance(img, (HdrImage, LdrImage)) else img
    out = _convolve_axis(data, kern, axis=0)
    out = _convolve_axis(out, kern, axis=1)
    if isinstance(img, LdrImage):
        return LdrImage(np.clip(out, 0.0, 1.0))
    if isinstance(img, HdrImage):
        return HdrImage(np.clip(out, 0.0, None))
    return out


def _convolve_axis(data, kern, axis):
    half = (kern.size - 1) // 2
    moved = np.moveaxis(data, axis, -1)
    pad = [(0, 0)] * (moved.ndim - 1) + [(half, half)]
    padded = np.pad(moved, pad, mode="reflect")
    out = np.zeros_like(moved)
    n = moved.shape[-1]
    for t in range(kern.size):
        out += kern[t] * padded[..., t:t + n]
    return np.moveaxis(out, -1, axis)


def add_noise(img, sigma, seed):
    """Add clipped white Gaussian noise to an LDR image."""
    rng = np.random.default_rng(seed)
    data = img.data if isinstance(img, LdrImage) else np.asarray(img)
    noisy = data + rng.normal(0.0, sigma, data.shape)
    out = np.clip(noisy, 0.0, 1.0)
    return LdrImage(out) if isinstance(img, LdrImage) else out


def sensitivity_curves(images, extractor, blur_radii=(1.0, 2.0, 4.0),
                       noise_sigmas=(0.02, 0.05, 0.1), noise_seed=0):
    """pixFID of disturbed copies of ``images`` against the originals,
    per disturbance magnitude (original stats are fitted once)."""
    ref = gaussian_stats(extract_features(extractor, images))

    def against(disturbed):
        return frechet_distance(
            ref, gaussian_stats(extract_features(extractor, disturbed)))

    blur = [(r, against([gaussian_blur(im, r) for im in images]))
            for r in blur_radii]
    noise = [(s, against([add_noise(im, s, noise_seed + i)
                          for i, im in enumerate(images)]))
             for s in noise_sigmas]
    return {"blur": blur, "noise": noise}
