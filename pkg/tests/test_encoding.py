import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parity_kernels import encoding
from parity_kernels.datagen import GeneratorConfig, generate_features

TWO_PI = 2.0 * np.pi


def test_select_informative_projection_identity():
    cfg = GeneratorConfig(n_samples=40, n_features=30, n_informative=4,
                          n_redundant=5, clusters_per_class=2, seed=1)
    ds = generate_features(cfg)
    view = encoding.select_informative(ds)
    assert view.shape == (40, 4)
    assert np.array_equal(view, ds.features[:, :4])


def test_select_informative_single_column():
    cfg = GeneratorConfig(n_samples=10, n_features=5, n_informative=1, seed=1)
    view = encoding.select_informative(generate_features(cfg))
    assert view.shape == (10, 1)


class TestThresholds:
    @pytest.mark.parametrize("column, expected", [
        ([1.0, 2.0, 3.0], 2.0),
        ([1.0, 2.0, 3.0, 4.0], 2.5),
        ([5.0, 5.0, 5.0, 5.0], 5.0),
    ])
    def test_median_conventions(self, column, expected):
        thr = encoding.fit_thresholds(np.array(column)[:, None])
        assert thr.medians[0] == expected

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            encoding.fit_thresholds(np.empty((0, 2)))


class TestBinaryEncoding:
    def test_strict_threshold(self):
        thr = encoding.Thresholds(medians=np.array([2.5]))
        out = encoding.encode_binary(np.array([[3.1], [2.5], [1.0]]), thr)
        assert out.tolist() == [[np.pi], [0.0], [0.0]]

    def test_all_below_row(self):
        thr = encoding.Thresholds(medians=np.array([1.0, 2.0]))
        out = encoding.encode_binary(np.array([[0.0, 0.0]]), thr)
        assert np.array_equal(out, np.zeros((1, 2)))

    def test_entries_exactly_binary(self):
        r = np.random.default_rng(0)
        view = r.standard_normal((50, 3))
        thr = encoding.fit_thresholds(view)
        out = encoding.encode_binary(view, thr)
        assert set(np.unique(out)) <= {0.0, np.pi}

    def test_column_mismatch_rejected(self):
        thr = encoding.Thresholds(medians=np.array([1.0, 2.0]))
        with pytest.raises(ValueError, match="column count"):
            encoding.encode_binary(np.zeros((3, 3)), thr)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 3.1))
    def test_idempotent_on_binary_views(self, seed, threshold):
        r = np.random.default_rng(seed)
        binary = np.where(r.random((10, 4)) < 0.5, 0.0, np.pi)
        thr = encoding.Thresholds(medians=np.full(4, threshold))
        assert np.array_equal(encoding.encode_binary(binary, thr), binary)


class TestMinMaxScaling:
    def test_endpoints_and_midpoint(self):
        params = encoding.fit_scaler(np.array([[0.0], [5.0]]))
        out = encoding.scale_minmax(np.array([[5.0], [2.5], [0.0]]), params)
        assert out[0, 0] == pytest.approx(TWO_PI)
        assert out[1, 0] == pytest.approx(np.pi)
        assert out[2, 0] == 0.0

    def test_constant_column_maps_to_zero(self):
        params = encoding.fit_scaler(np.full((4, 1), 7.0))
        out = encoding.scale_minmax(np.full((3, 1), 7.0), params)
        assert np.array_equal(out, np.zeros((3, 1)))

    def test_test_values_clamped(self):
        params = encoding.fit_scaler(np.array([[0.0], [1.0]]))
        out = encoding.scale_minmax(np.array([[-4.0], [4.0]]), params)
        assert out[0, 0] == 0.0
        assert out[1, 0] == TWO_PI

    def test_train_range_covered(self, rng):
        view = rng.standard_normal((30, 5))
        params = encoding.fit_scaler(view)
        out = encoding.scale_minmax(view, params)
        assert out.min() >= 0.0 and out.max() <= TWO_PI
        assert np.allclose(out.min(axis=0), 0.0)
        assert np.allclose(out.max(axis=0), TWO_PI)

    def test_column_mismatch_rejected(self):
        params = encoding.fit_scaler(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="column count"):
            encoding.scale_minmax(np.zeros((2, 3)), params)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            encoding.fit_scaler(np.empty((0, 1)))
