"""Range-compression tests: curve oracle, histograms, cross-entropy,
and the differential-evolution level search."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdrgan.image import LdrImage, LuminanceMap
from hdrgan.rangecompress import CompressionParams, DegenerateLuminanceWarning, \
    Histogram, SearchConfig, build_canonical_histogram, compress, \
    cross_entropy_objective, estimate_lambda, histogram20, read_histogram, \
    write_histogram

EPS = 0.05


def _curve(x, lam, eps=EPS):
    """Independent scalar evaluation of the compression curve."""
    return math.log(lam * x + eps) / math.log(lam + eps)


class TestCompress:
    def test_matches_scalar_oracle_on_grid(self):
        xs = np.linspace(0.0, 1.0, 21)
        for lam in (1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6):
            raw = compress(xs, CompressionParams(lam, clamp=False))
            oracle = np.array([_curve(x, lam) for x in xs])
            np.testing.assert_allclose(raw, oracle, rtol=1e-9)

    def test_peak_maps_to_exactly_one(self):
        rng = np.random.default_rng(0)
        y = rng.uniform(0, 7.3, (32, 32))
        for lam in (1.0, 37.0, 1e4):
            y_c = compress(y, CompressionParams(lam, clamp=False))
            assert y_c[np.unravel_index(y.argmax(), y.shape)] == 1.0

    def test_midpoint_example(self):
        got = compress(np.array([0.5, 1.0]), CompressionParams(1000.0))
        assert got[0] == pytest.approx(0.8997, abs=1e-4)
        assert got[0] == pytest.approx(_curve(0.5, 1000.0), rel=1e-12)

    def test_zero_clamps_from_negative_raw(self):
        raw = compress(np.array([0.0, 1.0]),
                       CompressionParams(1000.0, clamp=False))
        assert raw[0] == pytest.approx(-0.4336, abs=1e-4)
        clamped = compress(np.array([0.0, 1.0]), CompressionParams(1000.0))
        assert clamped[0] == 0.0

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError, match="all-zero"):
            compress(np.zeros((4, 4)), CompressionParams(10.0))

    def test_non_finite_rejected(self):
        y = np.ones((2, 2))
        y[0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            compress(y, CompressionParams(10.0))

    def test_monotone_in_y(self):
        rng = np.random.default_rng(1)
        for lam in (1.0, 10.0, 1e3, 1e5):
            y = np.sort(rng.uniform(0, 100.0, 10000))
            y_c = compress(y, CompressionParams(lam))
            assert (np.diff(y_c) >= 0).all()

    def test_exact_scale_invariance(self):
        rng = np.random.default_rng(2)
        # float32-grained values make the scalings below exact in f64
        y = rng.uniform(0.01, 3.0, (64, 64)).astype(np.float32).astype(float)
        for lam in (1.0, 10.0, 1e3, 1e5):
            base = compress(y, CompressionParams(lam))
            for a in (2.0, 0.25, 3.0, 100.0):
                scaled = compress(a * y, CompressionParams(lam))
                np.testing.assert_array_equal(scaled, base)

    def test_lambda_strengthens_midtones(self):
        x = np.array([0.2, 1.0])
        lams = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5]
        vals = [compress(x, CompressionParams(l))[0] for l in lams]
        assert (np.diff(vals) > 0).all()

    def test_lambda_below_one_rejected(self):
        with pytest.raises(ValueError, match=">= 1"):
            CompressionParams(0.5)

    def test_luminance_map_container(self):
        lum = LuminanceMap(np.array([[1.0, 2.0]]))
        out = compress(lum, CompressionParams(5.0))
        assert isinstance(out, LuminanceMap)


class TestHistogram20:
    def test_single_low_bin(self):
        h = histogram20(np.full((10, 10), 0.01))
        assert h.bins[0] == 1.0
        assert h.bins[1:].sum() == 0.0

    def test_value_one_goes_to_top_bin(self):
        h = histogram20(np.array([1.0]))
        assert h.bins[19] == 1.0

    def test_bin_edges(self):
        h = histogram20(np.array([0.05, 0.0499999]))
        assert h.bins[0] == 0.5 and h.bins[1] == 0.5

    def test_uniform_sampling_statistics(self):
        rng = np.random.default_rng(3)
        h = histogram20(rng.uniform(0, 1, 10 ** 6))
        np.testing.assert_allclose(h.bins, 0.05, atol=2e-3)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            histogram20(np.array([1.2]))

    def test_histogram_type_invariants(self):
        with pytest.raises(ValueError, match="sum"):
            Histogram(np.full(20, 0.1))
        with pytest.raises(ValueError, match="non-negative"):
            Histogram(np.concatenate([[-0.05, 0.1], np.full(18, 0.95 / 18)]))


class TestCrossEntropy:
    def test_gibbs_equality_case(self):
        rng = np.random.default_rng(4)
        bins = rng.uniform(0.5, 1.0, 20)
        h = Histogram(bins / bins.sum())
        expected = -(h.bins * np.log(h.bins + 1e-6)).sum()
        assert cross_entropy_objective(h, h) == pytest.approx(expected,
                                                              rel=1e-12)

    def test_one_hot(self):
        one_hot = np.zeros(20)
        one_hot[7] = 1.0
        rng = np.random.default_rng(5)
        bins = rng.uniform(0.1, 1.0, 20)
        h_ldr = Histogram(bins / bins.sum())
        got = cross_entropy_objective(Histogram(one_hot), h_ldr)
        assert got == pytest.approx(-math.log(h_ldr.bins[7] + 1e-6),
                                    rel=1e-12)

    def test_zero_bin_floor_keeps_finite(self):
        one_hot = np.zeros(20)
        one_hot[3] = 1.0
        other = np.zeros(20)
        other[4] = 1.0
        got = cross_entropy_objective(Histogram(one_hot), Histogram(other))
        assert got == pytest.approx(-math.log(1e-6), rel=1e-12)
        assert math.isfinite(got)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_gibbs_inequality(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(0.01, 1.0, 20)
        b = rng.uniform(0.01, 1.0, 20)
        h = Histogram(a / a.sum())
        q = Histogram(b / b.sum())
        assert cross_entropy_objective(h, q) >= \
            cross_entropy_objective(h, h) - 1e-12


def _inverse_curve(y_c, lam, eps=EPS):
    return ((lam + eps) ** y_c - eps) / lam


def _sample_from_histogram(hist, n, rng):
    """Draw values whose 20-bin histogram approximates ``hist``."""
    counts = np.floor(hist.bins * n).astype(int)
    values = []
    for l, c in enumerate(counts):
        values.append(rng.uniform(l / 20, (l + 1) / 20, c))
    return np.concatenate(values + [np.array([1.0])])


class TestEstimateLambda:
    def _canonical(self):
        # plausible LDR-like histogram: mid-tone hump over a small floor
        centers = (np.arange(20) + 0.5) / 20
        bins = np.exp(-0.5 * ((centers - 0.4) / 0.1) ** 2) + 0.01
        return Histogram(bins / bins.sum())

    def test_recovers_constructed_level(self):
        h_ldr = self._canonical()
        rng = np.random.default_rng(7)
        y_c = _sample_from_histogram(h_ldr, 30000, rng)
        y = _inverse_curve(y_c, 500.0)
        cfg = SearchConfig(rng_seed=11)
        lam = estimate_lambda(y, h_ldr, cfg)
        assert 250.0 <= lam <= 1000.0
        # DE must reach the 100-point log-grid minimum
        grid = np.logspace(0, 6, 100)
        objective = [cross_entropy_objective(
            histogram20(compress(y, CompressionParams(l))), h_ldr)
            for l in grid]
        got = cross_entropy_objective(
            histogram20(compress(y, CompressionParams(lam))), h_ldr)
        assert got <= min(objective) + 1e-3

    def test_seed_determinism(self):
        h_ldr = self._canonical()
        rng = np.random.default_rng(8)
        y = rng.uniform(0.001, 30.0, (48, 48))
        assert estimate_lambda(y, h_ldr, SearchConfig(rng_seed=3)) == \
            estimate_lambda(y, h_ldr, SearchConfig(rng_seed=3))

    def test_scale_invariance(self):
        h_ldr = self._canonical()
        rng = np.random.default_rng(9)
        y = rng.uniform(0.001, 5.0, (32, 32)).astype(np.float32).astype(float)
        a = estimate_lambda(y, h_ldr, SearchConfig(rng_seed=5))
        b = estimate_lambda(100.0 * y, h_ldr, SearchConfig(rng_seed=5))
        assert a == b

    def test_constant_map_warns_and_returns_floor(self):
        h_ldr = self._canonical()
        with pytest.warns(DegenerateLuminanceWarning):
            lam = estimate_lambda(np.ones((8, 8)), h_ldr,
                                  SearchConfig(rng_seed=1))
        assert lam == 1.0

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError, match="all-zero"):
            estimate_lambda(np.zeros((8, 8)), self._canonical(),
                            SearchConfig(rng_seed=1))

    def test_population_floor(self):
        with pytest.raises(ValueError, match="population"):
            SearchConfig(rng_seed=0, population=3)


class TestCanonicalHistogram:
    def test_single_image_equals_its_histogram(self):
        rng = np.random.default_rng(10)
        img = LdrImage(rng.uniform(0, 1, (32, 32, 3)))
        from hdrgan.image import luminance
        got = build_canonical_histogram([img])
        expect = histogram20(luminance(img))
        np.testing.assert_allclose(got.bins, expect.bins, atol=1e-12)

    def test_mean_of_two_disjoint(self):
        dark = LdrImage(np.zeros((8, 8, 3)))
        bright = LdrImage(np.full((8, 8, 3), 0.5))
        got = build_canonical_histogram([dark, bright])
        assert got.bins[0] == pytest.approx(0.5)
        assert got.bins[10] == pytest.approx(0.5)

    def test_sums_to_one(self):
        rng = np.random.default_rng(11)
        imgs = [LdrImage(rng.uniform(0, 1, (16, 16, 3))) for _ in range(5)]
        got = build_canonical_histogram(imgs)
        assert abs(got.bins.sum() - 1.0) <= 1e-9

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            build_canonical_histogram([])


class TestHistogramFile:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        bins = rng.uniform(0.1, 1.0, 20)
        hist = Histogram(bins / bins.sum())
        path = tmp_path / "canon.hist"
        write_histogram(path, hist)
        back = read_histogram(path)
        np.testing.assert_array_equal(back.bins, hist.bins)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 20

    def test_wrong_line_count_rejected(self, tmp_path):
        path = tmp_path / "short.hist"
        path.write_text("0.5\n0.5\n")
        with pytest.raises(ValueError, match="20"):
            read_histogram(path)
