import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from undertext.cube import LabelMask
from undertext.errors import ConfigError, DataError
from undertext.threshold import ThresholdParams, apply_double_threshold, suggest_thresholds


class TestApply:
    def test_overtext_whitened(self):
        params = ThresholdParams(t1=0.20, t2=0.50, alpha=0.5)
        out = apply_double_threshold(np.array([[0.10]]), params)
        assert out[0, 0] == 1.0

    def test_undertext_darkened(self):
        params = ThresholdParams(t1=0.20, t2=0.50, alpha=0.5)
        out = apply_double_threshold(np.array([[0.30]]), params)
        assert out[0, 0] == pytest.approx(0.15)

    def test_pass_through_and_identity(self):
        params = ThresholdParams(t1=0.20, t2=0.50, alpha=0.5)
        assert apply_double_threshold(np.array([[0.70]]), params)[0, 0] == 0.70
        identity = ThresholdParams(t1=0.0, t2=0.0, alpha=0.5)
        v = np.linspace(0, 1, 11).reshape(1, 11)
        np.testing.assert_array_equal(apply_double_threshold(v, identity), v)

    def test_t1_greater_than_t2_rejected(self):
        with pytest.raises(ConfigError):
            ThresholdParams(t1=0.6, t2=0.5)

    def test_out_of_range_input_rejected(self):
        params = ThresholdParams(t1=0.1, t2=0.2)
        with pytest.raises(DataError):
            apply_double_threshold(np.array([[1.5]]), params)

    def test_alpha_one_middle_band_noop(self):
        v = np.linspace(0, 1, 101).reshape(1, 101)
        params = ThresholdParams(t1=0.0, t2=0.6, alpha=1.0)
        np.testing.assert_array_equal(apply_double_threshold(v, params), v)

    @given(
        t1=st.floats(0, 1),
        t2=st.floats(0, 1),
        alpha=st.floats(0, 1),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=60, deadline=None)
    def test_properties_random_pixels(self, t1, t2, alpha, seed):
        t1, t2 = min(t1, t2), max(t1, t2)
        params = ThresholdParams(t1=t1, t2=t2, alpha=alpha)
        v = np.random.default_rng(seed).uniform(size=2048)
        out = apply_double_threshold(v, params)
        # range preserved
        assert out.min() >= 0.0 and out.max() <= 1.0
        # whitened set is exactly {v < t1}
        np.testing.assert_array_equal(out == 1.0, (v < t1) | (v == 1.0))
        # monotone on each region separately
        mid = (v >= t1) & (v < t2)
        order = np.argsort(v[mid])
        assert np.all(np.diff(out[mid][order]) >= 0)
        upper = v >= t2
        order = np.argsort(v[upper])
        assert np.all(np.diff(out[upper][order]) >= 0)

    def test_raising_t1_never_unwhitens(self):
        v = np.random.default_rng(3).uniform(size=4096)
        lower = apply_double_threshold(v, ThresholdParams(t1=0.3, t2=0.6, alpha=0.5))
        higher = apply_double_threshold(v, ThresholdParams(t1=0.4, t2=0.6, alpha=0.5))
        assert np.all(higher[lower == 1.0] == 1.0)

    def test_million_pixel_property_sweep(self):
        # acceptance-scale check: 1e6 random pixels through a few parameter sets
        v = np.random.default_rng(9).uniform(size=1_000_000)
        for t1, t2, alpha in [(0.2, 0.5, 0.5), (0.0, 0.0, 0.3), (0.4, 0.4, 0.0), (0.1, 0.9, 1.0)]:
            params = ThresholdParams(t1=t1, t2=t2, alpha=alpha)
            out = apply_double_threshold(v, params)
            assert out.min() >= 0.0 and out.max() <= 1.0
            np.testing.assert_array_equal(out[v < t1], 1.0)
            band = (v >= t1) & (v < t2)
            np.testing.assert_allclose(out[band], alpha * v[band], atol=1e-15)
            np.testing.assert_array_equal(out[v >= t2], v[v >= t2])


class TestSuggest:
    def _mask(self, width=4):
        labels = np.zeros((2, width), np.uint8)
        labels[0, :] = 1  # overtext row
        labels[1, :] = 2  # undertext row
        return LabelMask(labels=labels)

    def test_degenerate_single_valued_classes(self):
        image = np.array([[0.1] * 4, [0.4] * 4])
        params = suggest_thresholds(image, self._mask())
        assert params.t1 == pytest.approx(0.25)
        assert params.t2 == pytest.approx(0.4)
        assert params.alpha == 0.5

    def test_overlapping_distributions_clamped(self):
        image = np.array([[0.5] * 4, [0.3] * 4])  # overtext p95 > undertext p5
        params = suggest_thresholds(image, self._mask())
        assert params.t1 == pytest.approx(0.3)

    def test_missing_undertext_rejected(self):
        labels = np.zeros((2, 4), np.uint8)
        labels[0, :] = 1
        with pytest.raises(DataError):
            suggest_thresholds(np.full((2, 4), 0.5), LabelMask(labels=labels))
