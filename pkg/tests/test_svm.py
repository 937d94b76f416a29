import numpy as np
import pytest

from innerspeech.exceptions import (
    DimensionMismatch,
    NonFiniteFeature,
    SingleClassData,
    UntrainedModel,
)
from innerspeech.svm import SvmClassifier


def test_two_separable_points_linear():
    X = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    m = SvmClassifier(kernel="linear").fit(X, y)
    np.testing.assert_array_equal(m.predict(X), y)
    assert m.kkt_residual_ < 1e-3


def test_xor_linear_vs_rbf():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    lin = SvmClassifier(kernel="linear", C=10.0).fit(X, y)
    assert (lin.predict(X) == y).mean() <= 0.75
    rbf = SvmClassifier(kernel="rbf", gamma=2.0, C=10.0).fit(X, y)
    np.testing.assert_array_equal(rbf.predict(X), y)


def test_blobs_cv_accuracy(blobs4):
    X, y = blobs4
    rng = np.random.default_rng(10)
    perm = rng.permutation(len(y))
    X, y = X[perm], y[perm]
    accs = []
    folds = np.array_split(np.arange(len(y)), 4)
    centroids_ok = 0
    for test_idx in folds:
        train_mask = np.ones(len(y), bool)
        train_mask[test_idx] = False
        m = SvmClassifier().fit(X[train_mask], y[train_mask])
        pred = m.predict(X[test_idx])
        accs.append((pred == y[test_idx]).mean())
        # nearest-centroid oracle on well-separated blobs
        cents = np.stack([X[train_mask][y[train_mask] == c].mean(axis=0)
                          for c in range(4)])
        d = ((X[test_idx][:, None, :] - cents[None]) ** 2).sum(axis=2)
        centroids_ok += (pred == np.argmin(d, axis=1)).all()
    assert np.mean(accs) > 0.95
    assert centroids_ok == 4
    assert m.kkt_residual_ < 1e-3


def test_binary_sign_flip():
    rng = np.random.default_rng(11)
    X = np.concatenate([rng.normal(-2, 0.5, (20, 2)), rng.normal(2, 0.5, (20, 2))])
    y = np.repeat([0, 1], 20)
    m = SvmClassifier(kernel="linear").fit(X, y)
    grid = rng.uniform(-3, 3, (50, 2))
    scores = m.decision_function(grid)[:, 0]
    pred = m.predict(grid)
    # binary OvO score convention: positive score votes for the first class
    assert set(np.unique(pred)) <= {0, 1}
    np.testing.assert_array_equal(pred, np.where(scores > 0, 0, 1))


def test_linear_margin_oracle():
    # recover w, b from the dual and check sign agreement on a grid
    rng = np.random.default_rng(12)
    X = np.concatenate([rng.normal([-2, 0], 0.4, (25, 2)),
                        rng.normal([2, 0], 0.4, (25, 2))])
    y = np.repeat([0, 1], 25)
    m = SvmClassifier(kernel="linear", C=1.0).fit(X, y)
    pm = m.pairs_[0]
    w = pm.coef @ pm.sv
    grid = rng.uniform(-3, 3, (50, 2))
    oracle = grid @ w + pm.bias
    np.testing.assert_allclose(m.decision_function(grid)[:, 0], oracle,
                               atol=1e-10)


def test_predicts_own_support_vectors():
    rng = np.random.default_rng(13)
    X = np.concatenate([rng.normal(-3, 0.3, (15, 3)), rng.normal(3, 0.3, (15, 3))])
    y = np.repeat([0, 1], 15)
    m = SvmClassifier().fit(X, y)
    pm = m.pairs_[0]
    pred = m.predict(pm.sv)
    np.testing.assert_array_equal(pred, np.where(pm.coef > 0, 0, 1))


def test_zero_column_invariance(blobs4):
    X, y = blobs4
    m1 = SvmClassifier(gamma=0.5, seed=0).fit(X, y)
    m2 = SvmClassifier(gamma=0.5, seed=0).fit(
        np.hstack([X, np.zeros((len(y), 1))]), y)
    np.testing.assert_allclose(
        m1.decision_function(X), m2.decision_function(np.hstack([X, np.zeros((len(y), 1))])),
        atol=1e-12)


def test_determinism(blobs4):
    X, y = blobs4
    a = SvmClassifier(seed=0).fit(X, y)
    b = SvmClassifier(seed=0).fit(X, y)
    for pa, pb in zip(a.pairs_, b.pairs_):
        np.testing.assert_array_equal(pa.coef, pb.coef)
        assert pa.bias == pb.bias


def test_errors():
    with pytest.raises(SingleClassData):
        SvmClassifier().fit(np.zeros((4, 2)), np.zeros(4, dtype=int))
    with pytest.raises(NonFiniteFeature):
        SvmClassifier().fit(np.array([[np.nan], [1.0]]), np.array([0, 1]))
    m = SvmClassifier().fit(np.array([[0.0], [1.0]]), np.array([0, 1]))
    with pytest.raises(DimensionMismatch):
        m.predict(np.zeros((2, 3)))
    with pytest.raises(UntrainedModel):
        SvmClassifier().predict(np.zeros((1, 2)))


def test_json_roundtrip(blobs4):
    X, y = blobs4
    m = SvmClassifier(seed=0).fit(X, y)
    m2 = SvmClassifier.from_json(m.to_json())
    np.testing.assert_array_equal(m2.predict(X), m.predict(X))
    np.testing.assert_allclose(m2.decision_function(X), m.decision_function(X))
