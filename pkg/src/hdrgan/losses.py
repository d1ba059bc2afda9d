"""Training losses: least-squares adversarial terms, dense 5x5-patch
Pearson correlation, and the multi-scale structure-preservation loss.

Every function accepts either autodiff Tensors (returning a Tensor, so
gradients flow) or plain arrays / LuminanceMaps (returning a float).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .image import LuminanceMap

PATCH = 5
RHO_GUARD = 1e-6     # added to each patch standard deviation
VAR_FLOOR = 1e-24    # keeps sqrt differentiable on constant patches
SCALES = (0, 1, 2)


@dataclass(frozen=True)
class LossBreakdown:
    """One training step's loss terms."""

    l_disc: float
    l_natural: float
    l_struct: float
    w_struct: float

    @property
    def total_gen(self):
        return self.l_natural + self.w_struct * self.l_struct


def _as_nchw(x):
    """Normalize (H,W) / (B,1,H,W) inputs to a (B,1,H,W) Tensor and
    report whether the caller passed a Tensor."""
    was_tensor = isinstance(x, Tensor)
    if isinstance(x, LuminanceMap):
        x = x.data
    if not was_tensor:
        x = Tensor(np.asarray(x))
    if x.data.ndim == 2:
        x = ad.reshape(x, (1, 1) + x.data.shape)
    elif x.data.ndim != 4:
        raise ValueError(f"expected (H,W) or (B,1,H,W), got {x.data.shape}")
    return x, was_tensor


def patch_pearson(i, j):
    """Mean Pearson correlation over all stride-1 5x5 patches.

    Population statistics inside each patch; both standard deviations
    are guarded by RHO_GUARD, so constant patches contribute ~0 (guard
    rounding, never NaN).
    """
    x, i_t = _as_nchw(i)
    y, j_t = _as_nchw(j)
    if x.data.shape != y.data.shape:
        raise ValueError(f"shape mismatch: {x.data.shape} vs {y.data.shape}")
    h, w = x.data.shape[-2:]
    if h < PATCH or w < PATCH:
        raise ValueError(f"maps must be at least {PATCH}x{PATCH}, "
                         f"got {h}x{w}")
    dtype = np.result_type(x.data.dtype, y.data.dtype)
    box = Tensor(np.full((1, 1, PATCH, PATCH), 1.0 / PATCH ** 2, dtype=dtype))
    mean_x = ad.conv2d(x, box)
    mean_y = ad.conv2d(y, box)
    cov = ad.conv2d(ad.mul(x, y), box) - ad.mul(mean_x, mean_y)
    var_x = ad.relu(ad.conv2d(ad.mul(x, x), box) - ad.mul(mean_x, mean_x))
    var_y = ad.relu(ad.conv2d(ad.mul(y, y), box) - ad.mul(mean_y, mean_y))
    sd_x = ad.sqrt(ad.add(var_x, VAR_FLOOR))
    sd_y = ad.sqrt(ad.add(var_y, VAR_FLOOR))
    rho = ad.div(cov, ad.mul(ad.add(sd_x, RHO_GUARD), ad.add(sd_y, RHO_GUARD)))
    result = ad.mean(rho)
    return result if (i_t or j_t) else result.item()


def structural_loss(y_c, out, scales=SCALES):
    """Sum over pyramid scales of (1 - patch_pearson) between the
    compressed input luma and the network output.

    Minimizing this maximizes correlation, i.e. preserves local
    structure while leaving brightness/contrast free.  Scales whose
    downscaled extent cannot hold a 5x5 patch are skipped.
    """
    x, i_t = _as_nchw(y_c)
    y, j_t = _as_nchw(out)
    if x.data.shape != y.data.shape:
        raise ValueError(f"shape mismatch: {x.data.shape} vs {y.data.shape}")
    h, w = x.data.shape[-2:]
    div = 1 << max(scales)
    if h % div or w % div:
        raise ValueError(f"dimensions {h}x{w} not divisible by {div}")
    total = None
    for k in sorted(scales):
        if min(h, w) >> k < PATCH:
            continue
        term = ad.sub(1.0, patch_pearson(_downscale_k(x, k),
                                         _downscale_k(y, k)))
        total = term if total is None else ad.add(total, term)
    if total is None:
        raise ValueError(f"maps of {h}x{w} are too small at every scale")
    return total if (i_t or j_t) else total.item()


def _downscale_k(x, k):
    for _ in range(k):
        x = ad.downscale2x(x)
    return x


def _score_tensor(v):
    if isinstance(v, Tensor):
        return v, True
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty score batch")
    return Tensor(arr), False


def _check_scales(scores, scales, label):
    missing = [k for k in scales if k not in scores]
    if missing:
        raise ValueError(f"{label} scores missing scales {missing}")


def lsgan_discriminator_loss(real_scores, fake_scores, scales=SCALES):
    """Least-squares critic loss: real scores pulled to 1, fake to 0,
    summed over the pyramid scales."""
    _check_scales(real_scores, scales, "real")
    _check_scales(fake_scores, scales, "fake")
    total = None
    any_tensor = False
    for k in scales:
        r, r_t = _score_tensor(real_scores[k])
        f, f_t = _score_tensor(fake_scores[k])
        any_tensor |= r_t or f_t
        term = ad.add(ad.mean(ad.pow_const(ad.sub(r, 1.0), 2)),
                      ad.mean(ad.pow_const(f, 2)))
        total = term if total is None else ad.add(total, term)
    return total if any_tensor else total.item()


def lsgan_generator_loss(fake_scores, scales=SCALES):
    """Least-squares generator loss: fake scores pulled to 1."""
    _check_scales(fake_scores, scales, "fake")
    total = None
    any_tensor = False
    for k in scales:
        f, f_t = _score_tensor(fake_scores[k])
        any_tensor |= f_t
        term = ad.mean(ad.pow_const(ad.sub(f, 1.0), 2))
        total = term if total is None else ad.add(total, term)
    return total if any_tensor else total.item()


def luma_pyramid(x, scales=SCALES):
    """Bicubic pyramid {k: x downscaled by 2^k} (differentiable)."""
    x, _ = _as_nchw(x)
    out = {}
    for k in sorted(scales):
        out[k] = _downscale_k(x, k)
    return out
