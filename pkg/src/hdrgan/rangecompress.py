"""Adaptive log-curve range compression and its compression-level search.

The curve maps a raw luminance map into [0, 1]:

    Yc(x) = log(lam * Y(x)/max(Y) + eps) / log(lam + eps),   eps = 0.05

``lam`` interpolates between a near-linear mapping (lam ~ 1) and a
severe log-like curve (large lam).  The per-image level is found by
matching the 20-bin histogram of Yc against a canonical LDR-luminance
histogram under a cross-entropy objective, minimized with a
rand/1/bin differential-evolution search over log10(lam).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .image import LuminanceMap, luminance

N_BINS = 20
CURVE_EPSILON = 0.05
HIST_FLOOR = 1e-6


class DegenerateLuminanceWarning(UserWarning):
    """Constant luminance map: every compression level is equivalent."""


@dataclass(frozen=True)
class Histogram:
    """Normalized 20-bin luminance distribution over [0, 1]."""

    bins: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.float64)
        if arr.shape != (N_BINS,):
            raise ValueError(f"histogram must have {N_BINS} bins")
        if (arr < 0).any():
            raise ValueError("histogram bins must be non-negative")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram must sum to 1, got {arr.sum()!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "bins", arr)


@dataclass(frozen=True)
class CompressionParams:
    lam: float
    epsilon: float = CURVE_EPSILON
    clamp: bool = True

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 1.0:
            raise ValueError(f"compression level must be >= 1, got {self.lam}")
        if self.epsilon <= 0.0:
            raise ValueError("curve offset epsilon must be positive")


@dataclass(frozen=True)
class SearchConfig:
    rng_seed: int
    lambda_log10_range: tuple = (0.0, 6.0)
    population: int = 20
    generations: int = 50
    f: float = 0.8
    cr: float = 0.9

    def __post_init__(self):
        lo, hi = self.lambda_log10_range
        if not lo < hi:
            raise ValueError("search range lower bound must be < upper")
        if self.population < 4:
            raise ValueError("population must be >= 4")


def compress(y, params):
    """Apply the adaptive tone-reproduction curve to a luminance map."""
    is_map = isinstance(y, LuminanceMap)
    data = y.data if is_map else np.asarray(y, dtype=np.float64)
    if not np.isfinite(data).all():
        raise ValueError("luminance map contains non-finite values")
    if (data < 0).any():
        raise ValueError("luminance map contains negative values")
    peak = data.max()
    if peak == 0.0:
        raise ValueError("cannot compress an all-zero luminance map")
    lam, eps = params.lam, params.epsilon
    out = np.log(lam * (data / peak) + eps) / np.log(lam + eps)
    if params.clamp:
        out = np.clip(out, 0.0, 1.0)
    return LuminanceMap(out) if is_map else out


def histogram20(y_c):
    """20-bin histogram of values in [0, 1], bin 19 owning the value 1."""
    data = y_c.data if isinstance(y_c, LuminanceMap) else np.asarray(y_c)
    if (data < 0).any() or (data > 1).any():
        raise ValueError("histogram input must lie in [0, 1]")
    idx = np.minimum((data * N_BINS).astype(np.int64), N_BINS - 1)
    counts = np.bincount(idx.ravel(), minlength=N_BINS).astype(np.float64)
    return Histogram(counts / data.size)


def cross_entropy_objective(h, h_ldr):
    """-sum_l h[l] * log(h_ldr[l] + floor); natural log, always finite."""
    return float(-(h.bins * np.log(h_ldr.bins + HIST_FLOOR)).sum())


def build_canonical_histogram(ldr_images):
    """Average the per-image luma histograms of native LDR images."""
    if not ldr_images:
        raise ValueError("need at least one LDR image")
    acc = np.zeros(N_BINS)
    for img in ldr_images:
        acc += histogram20(luminance(img)).bins
    return Histogram(acc / acc.sum())


def estimate_lambda(y, h_ldr, cfg):
    """Best compression level found by differential evolution.

    Searches log10(lam) over ``cfg.lambda_log10_range`` for the level
    whose compressed-luminance histogram is closest (cross-entropy) to
    ``h_ldr``.  Deterministic for a fixed ``cfg.rng_seed``.  A constant
    input has the same histogram at every level; it yields the range
    floor and a DegenerateLuminanceWarning.
    """
    data = y.data if isinstance(y, LuminanceMap) else np.asarray(y, float)
    lo, hi = cfg.lambda_log10_range
    if data.max() == data.min():
        if data.max() == 0.0:
            raise ValueError("cannot compress an all-zero luminance map")
        warnings.warn("constant luminance map; returning the smallest "
                      "compression level", DegenerateLuminanceWarning)
        return 10.0 ** lo
    # compress() normalizes by the map peak, so pre-dividing here is
    # exact (peak maps to 1.0) and saves re-scanning per evaluation
    y_norm = data / data.max()
    ldr_log = np.log(h_ldr.bins + HIST_FLOOR)

    def objective(t):
        y_c = compress(y_norm, CompressionParams(10.0 ** t))
        return float(-(histogram20(y_c).bins * ldr_log).sum())

    rng = np.random.default_rng(cfg.rng_seed)
    pop = rng.uniform(lo, hi, size=cfg.population)
    cost = np.array([objective(t) for t in pop])
    best = int(np.argmin(cost))
    for _ in range(cfg.generations):
        for i in range(cfg.population):
            others = [j for j in range(cfg.population) if j != i]
            a, b, c = rng.choice(others, size=3, replace=False)
            trial = np.clip(pop[a] + cfg.f * (pop[b] - pop[c]), lo, hi)
            # bin crossover over a single dimension always takes the mutant
            f_trial = objective(trial)
            if f_trial <= cost[i]:
                pop[i] = trial
                cost[i] = f_trial
                if f_trial < cost[best]:
                    best = i
    return float(10.0 ** pop[best])


# ---------------------------------------------------------------------------
# canonical histogram file format: 20 lines, one float per line
# ---------------------------------------------------------------------------

def write_histogram(path, hist):
    from .hdrio import atomic_write_bytes
    text = "".join(f"{v:.17g}\n" for v in hist.bins)
    atomic_write_bytes(path, text.encode("ascii"))


def read_histogram(path):
    with open(path, "r", encoding="ascii") as fh:
        values = [float(line) for line in fh if line.strip()]
    if len(values) != N_BINS:
        raise ValueError(f"{path}: expected {N_BINS} histogram lines, "
                         f"got {len(values)}")
    return Histogram(np.asarray(values))
