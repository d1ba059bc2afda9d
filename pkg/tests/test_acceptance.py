"""Acceptance suite: one test per release criterion, each printing a
pass/fail line with its runtime and asserting its stated budget.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they complete.
"""

import math
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import pytest

from hdrgan import losses as L
from hdrgan.autodiff import Tensor
from hdrgan.datasets import synth_hdr, synth_ldr
from hdrgan.hdrio import quantize8
from hdrgan.image import HdrImage
from hdrgan.nets import DiscriminatorEnsemble, Generator, GeneratorSpec
from hdrgan.optim import lr_at_epoch
from hdrgan.pixfid import FeatureStats, StubFeatureExtractor, \
    frechet_distance, sensitivity_curves
from hdrgan.rangecompress import CompressionParams, Histogram, SearchConfig, \
    build_canonical_histogram, compress, cross_entropy_objective, \
    estimate_lambda, histogram20
from hdrgan.trainloop import TrainConfig, prepare_hdr_batch, \
    restore_models, save_checkpoint, load_checkpoint, tonemap, train

CURVE_EPS = 0.05


@contextmanager
def criterion(number, budget_s, description):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        elapsed = time.perf_counter() - start
        print(f"[criterion {number:02d}] FAIL ({elapsed:6.1f}s)  "
              f"{description}", file=sys.stderr)
        raise
    elapsed = time.perf_counter() - start
    print(f"[criterion {number:02d}] PASS ({elapsed:6.1f}s)  {description}",
          file=sys.stderr)
    assert elapsed < budget_s, \
        f"criterion {number} took {elapsed:.1f}s, budget {budget_s}s"


def test_criterion_01_curve_oracle():
    with criterion(1, 1.0, "compression curve matches direct evaluation"):
        xs = np.linspace(0.0, 1.0, 21)
        lams = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6]
        for lam in lams:
            raw = compress(xs, CompressionParams(lam, clamp=False))
            oracle = np.array(
                [math.log(lam * x + CURVE_EPS) / math.log(lam + CURVE_EPS)
                 for x in xs])
            np.testing.assert_allclose(raw, oracle, rtol=1e-9)
        raw0 = compress(np.array([0.0, 1.0]),
                        CompressionParams(1000.0, clamp=False))[0]
        assert raw0 == pytest.approx(-0.4336, abs=1e-4)
        clamped = compress(np.array([0.0, 1.0]), CompressionParams(1000.0))
        assert clamped[0] == 0.0


def test_criterion_02_curve_properties():
    with criterion(2, 5.0, "curve monotonicity and exact scale invariance"):
        rng = np.random.default_rng(0)
        pairs = rng.uniform(0.0, 50.0, (2, 10_000))
        pairs = pairs.astype(np.float32).astype(np.float64)
        lo = np.minimum(pairs[0], pairs[1])
        hi = np.maximum(pairs[0], pairs[1])
        stacked = np.concatenate([lo, hi, [50.0]])
        for lam in (1.0, 10.0, 1e3, 1e5):
            y_c = compress(stacked, CompressionParams(lam))
            assert (y_c[:10_000] <= y_c[10_000:20_000] + 1e-15).all()
            base = compress(stacked, CompressionParams(lam))
            for a in (2.0, 0.25, 3.0, 100.0):
                np.testing.assert_array_equal(
                    compress(a * stacked, CompressionParams(lam)), base)


def _ldr_like_histogram():
    centers = (np.arange(20) + 0.5) / 20
    bins = np.exp(-0.5 * ((centers - 0.4) / 0.1) ** 2) + 0.01
    return Histogram(bins / bins.sum())


def test_criterion_03_lambda_recovery():
    with criterion(3, 60.0, "level search recovers a constructed level"):
        h_ldr = _ldr_like_histogram()
        rng = np.random.default_rng(7)
        counts = np.floor(h_ldr.bins * 30_000).astype(int)
        y_c = np.concatenate(
            [rng.uniform(l / 20, (l + 1) / 20, c)
             for l, c in enumerate(counts)] + [np.array([1.0])])
        lam_true = 500.0
        y = ((lam_true + CURVE_EPS) ** y_c - CURVE_EPS) / lam_true
        lam_hat = estimate_lambda(y, h_ldr, SearchConfig(rng_seed=11))
        assert 250.0 <= lam_hat <= 1000.0
        lam_again = estimate_lambda(y, h_ldr, SearchConfig(rng_seed=11))
        assert lam_hat == lam_again

        def objective(lam):
            return cross_entropy_objective(
                histogram20(compress(y, CompressionParams(lam))), h_ldr)

        grid_min = min(objective(l) for l in np.logspace(0, 6, 100))
        assert objective(lam_hat) <= grid_min + 1e-3


def test_criterion_04_pearson_suite():
    with criterion(4, 5.0, "patch Pearson identities on random images"):
        rng = np.random.default_rng(1)
        for _ in range(20):
            img = rng.uniform(0, 1, (32, 32))
            assert L.patch_pearson(img, img) == pytest.approx(1.0, abs=1e-4)
            a = rng.uniform(0.2, 3.0)
            b = rng.uniform(-2.0, 2.0)
            assert L.patch_pearson(img, a * img + b) == \
                pytest.approx(1.0, abs=1e-4)
            assert L.patch_pearson(img, -img) == pytest.approx(-1.0,
                                                               abs=1e-4)
        guard = L.patch_pearson(np.full((8, 8), 0.4), np.full((8, 8), 0.6))
        assert math.isfinite(guard)
        assert guard == pytest.approx(0.0, abs=1e-4)


def test_criterion_05_structural_gradient():
    with criterion(5, 30.0, "structural-loss gradient vs finite differences"):
        rng = np.random.default_rng(2)
        y_c = rng.uniform(0, 1, (16, 16))
        out0 = rng.uniform(0.2, 0.8, (16, 16))
        t = Tensor(out0.copy(), requires_grad=True)
        L.structural_loss(Tensor(y_c), t).backward()
        grad = t.grad
        step = 1e-4
        for _ in range(20):
            idx = (rng.integers(0, 16), rng.integers(0, 16))
            plus = out0.copy()
            plus[idx] += step
            minus = out0.copy()
            minus[idx] -= step
            fd = (L.structural_loss(y_c, plus)
                  - L.structural_loss(y_c, minus)) / (2 * step)
            rel = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-8)
            assert rel < 1e-3


def test_criterion_06_architecture_constants():
    with criterion(6, 10.0, "network parameter counts and output range"):
        gen = Generator(seed=0)
        assert 3_500_000 <= gen.num_params() <= 5_500_000
        disc = DiscriminatorEnsemble(seed=0)
        assert 25_000 <= disc.num_params() <= 40_000
        plain = Generator(GeneratorSpec(sqrt_skips=False), seed=0)
        enc_f = [32, 64, 128, 256]
        dec_f = [64, 32, 16, 8]
        for level, (f, s) in enumerate(zip(dec_f, reversed(enc_f))):
            name = f"gen.dec{4 - level}.c1.w"
            assert gen.parameters()[name].data.shape[1] == f + 2 * s
            assert plain.parameters()[name].data.shape[1] == f + s
        rng = np.random.default_rng(3)
        out = gen(rng.uniform(0, 1, (1, 1, 64, 64)).astype(np.float32))
        assert out.data.min() > 0.0 and out.data.max() < 1.0


def test_criterion_07_lsgan_values():
    with criterion(7, 1.0, "adversarial losses at label targets"):
        ones = {k: np.ones(4) for k in (0, 1, 2)}
        zeros = {k: np.zeros(4) for k in (0, 1, 2)}
        halves = {k: np.full(4, 0.5) for k in (0, 1, 2)}
        assert L.lsgan_discriminator_loss(ones, zeros) == 0.0
        assert L.lsgan_generator_loss(ones) == 0.0
        assert L.lsgan_discriminator_loss(halves, halves) == \
            pytest.approx(1.5, rel=1e-12)
        assert L.lsgan_generator_loss(halves) == pytest.approx(0.75,
                                                               rel=1e-12)


def test_criterion_08_frechet_distance():
    with criterion(8, 5.0, "Fréchet distance identities"):
        rng = np.random.default_rng(4)

        def random_stats():
            a = rng.normal(0, 1, (6, 9))
            return FeatureStats(mean=rng.normal(0, 1, 6), cov=a @ a.T / 9,
                                n_samples=20)

        for _ in range(5):
            s = random_stats()
            assert frechet_distance(s, s) == pytest.approx(0.0, abs=1e-8)
        one_d = frechet_distance(
            FeatureStats(np.array([0.0]), np.array([[1.0]]), 5),
            FeatureStats(np.array([1.0]), np.array([[4.0]]), 5))
        assert one_d == pytest.approx(2.0, abs=1e-6)
        for _ in range(5):
            a, b = random_stats(), random_stats()
            assert frechet_distance(a, b) == \
                pytest.approx(frechet_distance(b, a), abs=1e-8)


def test_criterion_09_pixfid_sensitivity():
    with criterion(9, 180.0, "pixFID rises with blur radius and noise"):
        images = [synth_ldr(100 + i, 256, 256) for i in range(32)]
        curves = sensitivity_curves(images, StubFeatureExtractor(),
                                    blur_radii=(1.0, 2.0, 4.0),
                                    noise_sigmas=(0.02, 0.05, 0.1))
        blur_scores = [s for _, s in curves["blur"]]
        noise_scores = [s for _, s in curves["noise"]]
        assert blur_scores[0] < blur_scores[1] < blur_scores[2]
        assert noise_scores[0] < noise_scores[1] < noise_scores[2]


@dataclass
class SmokeRun:
    cfg: TrainConfig
    checkpoint: object
    hist: Histogram
    train_hdr: list
    elapsed: float


@pytest.fixture(scope="module")
def smoke_run():
    hdr = [synth_hdr(i, 64, 64) for i in range(32)]
    ldr = [synth_ldr(1000 + i, 64, 64) for i in range(32)]
    hist = build_canonical_histogram(ldr)
    cfg = TrainConfig(epochs=10, pretrain_epochs=5, batch_size=4, seed=7)
    breakdowns = []
    start = time.perf_counter()
    ck = train(hdr, ldr, cfg, hist=hist,
               on_epoch=lambda e, b: breakdowns.append(b))
    elapsed = time.perf_counter() - start
    for b in breakdowns:
        assert np.isfinite([b.l_disc, b.l_natural, b.l_struct]).all()
    return SmokeRun(cfg=cfg, checkpoint=ck, hist=hist, train_hdr=hdr,
                    elapsed=elapsed)


def test_criterion_10_training_smoke(smoke_run):
    budget = 600.0
    start = time.perf_counter()
    held_out = [synth_hdr(5000 + i, 64, 64) for i in range(4)]
    gen, _, _ = restore_models(smoke_run.checkpoint)
    y_c = prepare_hdr_batch(held_out, smoke_run.cfg, smoke_run.hist)
    out = gen(y_c).data
    rhos = [L.patch_pearson(y_c[i, 0].astype(np.float64),
                            out[i, 0].astype(np.float64))
            for i in range(len(held_out))]
    elapsed = smoke_run.elapsed + (time.perf_counter() - start)
    mean_rho = float(np.mean(rhos))
    ok = (mean_rho >= 0.7
          and lr_at_epoch(smoke_run.cfg.lr_gen, 5) == 1e-4
          and elapsed < budget)
    print(f"[criterion 10] {'PASS' if ok else 'FAIL'} ({elapsed:6.1f}s)  "
          f"training smoke (held-out patch correlation {mean_rho:.3f})",
          file=sys.stderr)
    assert mean_rho >= 0.7
    assert lr_at_epoch(smoke_run.cfg.lr_gen, 5) == 1e-4
    assert elapsed < budget


def test_criterion_11_end_to_end_invariances(smoke_run):
    with criterion(11, 60.0, "tone mapping determinism and invariances"):
        ck = smoke_run.checkpoint
        img = smoke_run.train_hdr[0]
        a = tonemap(img, ck)
        b = tonemap(img, ck)
        np.testing.assert_array_equal(a.data, b.data)
        assert np.array_equal(quantize8(a.data), quantize8(b.data))
        scaled = tonemap(HdrImage(100.0 * img.data), ck)
        np.testing.assert_array_equal(scaled.data, a.data)
        rng = np.random.default_rng(5)
        field = rng.uniform(0.02, 30.0, (64, 64, 1))
        gray_out = tonemap(HdrImage(np.repeat(field, 3, axis=2)), ck)
        spread = gray_out.data.max(axis=2) - gray_out.data.min(axis=2)
        assert spread.max() <= 1e-6


def test_criterion_12_checkpoint_roundtrip(smoke_run, tmp_path):
    with criterion(12, 30.0, "checkpoint save/load preserves outputs"):
        ck = smoke_run.checkpoint
        gen0, _, _ = restore_models(ck)
        x = prepare_hdr_batch(smoke_run.train_hdr[:2], smoke_run.cfg,
                              smoke_run.hist)
        before = gen0(x).data.copy()
        save_checkpoint(tmp_path / "accept_ck", ck)
        gen1, _, _ = restore_models(load_checkpoint(tmp_path / "accept_ck"))
        np.testing.assert_array_equal(before, gen1(x).data)
