import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from innerspeech.core import Epoch, EpochSet
from innerspeech.dsp import DEFAULT_BANDS
from innerspeech.exceptions import (
    AllZeroGains,
    DegenerateData,
    DimensionMismatch,
    PcaProvenance,
)
from innerspeech.features import (
    FeatureMatrix,
    PcaModel,
    build_feature_matrix,
    columns_to_channels,
    export_selected_csv,
    intersect_selected,
    pca_fit,
    pca_transform,
    select_by_gain,
)


# --- build_feature_matrix ---

def test_feature_count_128ch():
    assert 128 * len(DEFAULT_BANDS) == 384


def test_feature_count_and_provenance(small_set):
    fm = build_feature_matrix(small_set, DEFAULT_BANDS)
    assert fm.n_features == 6 * 3 == 18
    assert fm.provenance[0] == ("F3", "alpha")
    assert fm.provenance[3] == ("F4", "alpha")
    assert len(set(fm.provenance)) == fm.n_features
    np.testing.assert_array_equal(fm.labels, small_set.labels)


def test_pure_tone_dominates_channel0_alpha(montage6):
    fs = 254.0
    t = np.arange(635) / fs
    data = np.zeros((6, 635))
    data[0] = np.sin(2 * np.pi * 10 * t)
    rng = np.random.default_rng(0)
    data += 1e-6 * rng.standard_normal(data.shape)  # avoid zero-power channels
    es = EpochSet(epochs=(Epoch(data=data, label=0),), sampling_rate_hz=fs,
                  class_names=("x",), channels=montage6)
    fm = build_feature_matrix(es, DEFAULT_BANDS)
    assert np.argmax(fm.values[0]) == 0  # (F3, alpha) column


def test_permutation_equivariance(small_set):
    fm = build_feature_matrix(small_set, DEFAULT_BANDS)
    perm = np.random.default_rng(1).permutation(len(small_set))
    shuffled = EpochSet(epochs=tuple(small_set.epochs[i] for i in perm),
                        sampling_rate_hz=small_set.sampling_rate_hz,
                        class_names=small_set.class_names,
                        channels=small_set.channels)
    fm2 = build_feature_matrix(shuffled, DEFAULT_BANDS)
    np.testing.assert_allclose(fm2.values, fm.values[perm])


def test_feature_matrix_invariants():
    with pytest.raises(ValueError):
        FeatureMatrix(values=np.array([[np.nan]]), provenance=(("C3", "alpha"),),
                      labels=np.array([0]))
    with pytest.raises(ValueError):
        FeatureMatrix(values=np.zeros((2, 2)), provenance=(("C3", "alpha"),),
                      labels=np.array([0, 1]))
    with pytest.raises(ValueError):
        FeatureMatrix(values=np.zeros((2, 1)), provenance=(("C3", "alpha"),),
                      labels=np.array([0]))


# --- PCA ---

def test_pca_rank_bound():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((8, 20))
    m = pca_fit(X, variance_target=1.0)
    assert m.n_components == min(8 - 1, 20) == 7


def test_pca_planar_data():
    rng = np.random.default_rng(3)
    basis = rng.standard_normal((2, 10))
    X = rng.standard_normal((40, 2)) @ basis
    assert pca_fit(X, variance_target=0.99).n_components == 2


def test_pca_reconstruction():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 20))
    m = pca_fit(X, variance_target=1.0)
    scores = (X - m.mean) @ m.components.T
    recon = scores @ m.components + m.mean
    np.testing.assert_allclose(recon, X, atol=1e-8)
    # independent oracle: covariance eigendecomposition
    cov = np.cov(X, rowvar=False)
    eig = np.sort(np.linalg.eigvalsh(cov))[::-1]
    np.testing.assert_allclose(m.explained_variance, eig[:m.n_components],
                               rtol=1e-8)


def test_pca_orthonormal_components():
    rng = np.random.default_rng(5)
    m = pca_fit(rng.standard_normal((30, 12)), variance_target=1.0)
    np.testing.assert_allclose(m.components @ m.components.T,
                               np.eye(m.n_components), atol=1e-8)


def test_pca_degenerate():
    with pytest.raises(DegenerateData):
        pca_fit(np.ones((10, 4)))
    with pytest.raises(DegenerateData):
        pca_fit(np.zeros((1, 4)))


def test_pca_transform_mean_row():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((20, 5))
    m = pca_fit(X, variance_target=1.0)
    fm = FeatureMatrix(values=X.mean(axis=0, keepdims=True),
                       provenance=tuple(("c", str(i)) for i in range(5)),
                       labels=np.array([0]))
    out = pca_transform(m, fm)
    np.testing.assert_allclose(out.values, 0, atol=1e-12)
    assert out.provenance[0] == "component-0"


def test_pca_component0_variance():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 8)) * np.array([5, 1, 1, 1, 1, 1, 1, 1])
    m = pca_fit(X, variance_target=1.0)
    fm = FeatureMatrix(values=X, provenance=tuple(("c", str(i)) for i in range(8)),
                       labels=np.zeros(60, dtype=int))
    scores = pca_transform(m, fm).values
    assert abs(scores[:, 0].var(ddof=1) - m.explained_variance[0]) < 1e-6


def test_pca_transform_dimension_mismatch():
    m = pca_fit(np.random.default_rng(8).standard_normal((10, 4)))
    fm = FeatureMatrix(values=np.zeros((2, 3)),
                       provenance=tuple(("c", str(i)) for i in range(3)),
                       labels=np.zeros(2, dtype=int))
    with pytest.raises(DimensionMismatch):
        pca_transform(m, fm)


def test_pca_json_roundtrip():
    m = pca_fit(np.random.default_rng(9).standard_normal((10, 4)))
    m2 = PcaModel.from_json(m.to_json())
    np.testing.assert_allclose(m2.components, m.components)
    np.testing.assert_allclose(m2.mean, m.mean)


# --- select_by_gain ---

def test_select_simple():
    assert select_by_gain(np.array([0.9, 0.05, 0.03, 0.02]), 0.95) == (0, 1)


def test_select_threshold_one():
    assert select_by_gain(np.array([0.5, 0.0, 0.3, 0.2]), 1.0) == (0, 2, 3)


def test_select_uniform():
    assert len(select_by_gain(np.ones(20), 0.95)) == 19


def test_select_tie_prefers_lower_index():
    assert select_by_gain(np.array([0.4, 0.4, 0.2]), 0.4) == (0,)


def test_select_all_zero():
    with pytest.raises(AllZeroGains):
        select_by_gain(np.zeros(4))


@settings(max_examples=50)
@given(st.lists(st.floats(0.001, 100.0), min_size=1, max_size=30),
       st.floats(0.05, 1.0))
def test_select_scale_invariance(gains, thr):
    g = np.array(gains)
    assert select_by_gain(g, thr) == select_by_gain(7.3 * g, thr)


# --- intersect / columns_to_channels / csv ---

def test_intersect():
    assert intersect_selected([(1, 2, 3)]) == (1, 2, 3)
    assert intersect_selected([(1, 2, 3), (2, 3, 4), (3, 2, 9)]) == (2, 3)
    with pytest.warns(UserWarning):
        assert intersect_selected([(1,), (2,)]) == ()


def test_columns_to_channels():
    prov = (("C3", "alpha"), ("C3", "beta"), ("C4", "alpha"))
    assert columns_to_channels((0, 1), prov) == {"C3"}
    assert columns_to_channels((), prov) == set()
    assert columns_to_channels((0, 1, 2), prov) == {"C3", "C4"}
    with pytest.raises(PcaProvenance):
        columns_to_channels((0,), ("component-0",))


def test_export_selected_csv(tmp_path):
    prov = (("C3", "alpha"), ("C4", "beta"))
    path = tmp_path / "sel.csv"
    export_selected_csv(str(path), (1,), prov, np.array([0.3, 0.7]))
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["column_index", "channel", "band", "gain"]
    assert rows[1] == ["1", "C4", "beta", "0.700000"]
