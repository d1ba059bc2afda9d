"""Image container and color-operation tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdrgan.image import EPS_DIV, HdrImage, ImageError, LdrImage, \
    LuminanceMap, luminance, reproduce_color


def _pixel(r, g, b):
    return HdrImage(np.array([[[r, g, b]]], dtype=float))


class TestContainers:
    def test_hdr_rejects_negative(self):
        with pytest.raises(ImageError, match="negative"):
            HdrImage(np.full((2, 2, 3), -1.0))

    def test_hdr_rejects_nan(self):
        data = np.ones((2, 2, 3))
        data[0, 0, 0] = np.nan
        with pytest.raises(ImageError, match="non-finite"):
            HdrImage(data)

    def test_ldr_rejects_out_of_range(self):
        with pytest.raises(ImageError, match=r"\[0, 1\]"):
            LdrImage(np.full((2, 2, 3), 1.5))

    def test_shape_validation(self):
        with pytest.raises(ImageError):
            HdrImage(np.ones((2, 2)))
        with pytest.raises(ImageError):
            LuminanceMap(np.ones((2, 2, 3)))

    def test_data_is_immutable(self):
        img = _pixel(1, 2, 3)
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 5.0

    def test_construction_copies(self):
        src = np.ones((2, 2, 3))
        img = HdrImage(src)
        src[0, 0, 0] = 99.0
        assert img.data[0, 0, 0] == 1.0


class TestLuminance:
    def test_white_is_exactly_one(self):
        assert luminance(_pixel(1, 1, 1)).data[0, 0] == 1.0

    def test_red_coefficient(self):
        assert luminance(_pixel(1, 0, 0)).data[0, 0] == 0.299

    def test_black_is_zero(self):
        assert luminance(_pixel(0, 0, 0)).data[0, 0] == 0.0

    def test_ldr_luma_stays_in_unit_range(self):
        rng = np.random.default_rng(0)
        img = LdrImage(rng.uniform(0, 1, (16, 16, 3)))
        y = luminance(img).data
        assert y.min() >= 0.0 and y.max() <= 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 1e6), st.floats(0.0, 1e6), st.floats(0.0, 1e6),
           st.floats(1e-3, 1e3))
    def test_linearity_in_scale(self, r, g, b, a):
        y1 = luminance(_pixel(a * r, a * g, a * b)).data[0, 0]
        y0 = luminance(_pixel(r, g, b)).data[0, 0]
        assert y1 == pytest.approx(a * y0, rel=1e-9, abs=1e-300)


class TestReproduceColor:
    def test_gray_pixel_passes_out_luma_through(self):
        hdr = _pixel(0.4, 0.4, 0.4)
        y = luminance(hdr)
        out_luma = LuminanceMap(np.array([[0.37]]))
        out = reproduce_color(hdr, y, out_luma, s=0.7)
        np.testing.assert_allclose(out.data[0, 0], 0.37, rtol=1e-9)

    def test_ratio_four_sqrt_saturation(self):
        # C/Y = 4 with s = 0.5 doubles the output luma
        hdr = _pixel(0.8, 0.8, 0.8)
        y = LuminanceMap(np.array([[0.2]]))
        out_luma = LuminanceMap(np.array([[0.3]]))
        out = reproduce_color(hdr, y, out_luma, s=0.5)
        np.testing.assert_allclose(out.data[0, 0], 0.6, rtol=1e-12)

    def test_black_pixel_guard(self):
        hdr = _pixel(0, 0, 0)
        y = LuminanceMap(np.array([[0.0]]))
        out_luma = LuminanceMap(np.array([[0.5]]))
        out = reproduce_color(hdr, y, out_luma, s=0.5)
        np.testing.assert_array_equal(out.data[0, 0], [0.0, 0.0, 0.0])

    def test_identity_when_s_is_one(self):
        rng = np.random.default_rng(1)
        data = rng.uniform(0.05, 1.0, (8, 8, 3))
        hdr = HdrImage(data)
        y = luminance(hdr)
        out = reproduce_color(hdr, y, y, s=1.0)
        np.testing.assert_allclose(out.data, data, rtol=1e-6)

    def test_dimension_mismatch(self):
        hdr = _pixel(1, 1, 1)
        y = LuminanceMap(np.ones((2, 2)))
        with pytest.raises(ImageError, match="dimensions"):
            reproduce_color(hdr, y, y, s=0.5)

    def test_saturation_range(self):
        hdr = _pixel(1, 1, 1)
        y = luminance(hdr)
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(ImageError, match="saturation"):
                reproduce_color(hdr, y, y, s=bad)

    def test_result_clamped(self):
        hdr = _pixel(0.9, 0.001, 0.001)
        y = luminance(hdr)
        out_luma = LuminanceMap(np.array([[1.0]]))
        out = reproduce_color(hdr, y, out_luma, s=0.5)
        assert out.data.max() <= 1.0


def test_eps_div_constant():
    assert EPS_DIV == 1e-9
