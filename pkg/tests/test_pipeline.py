import json

import numpy as np
import pytest

from innerspeech.exceptions import ConfigInvalid
from innerspeech.gbt import GbtClassifier
from innerspeech.pipeline import (
    FeatureModel,
    PipelineConfig,
    RawChannelSelectModel,
    load_report_json,
    run,
    save_report_json,
)
from innerspeech.synth import Injection, SynthSpec, generate


def _config(**overrides):
    base = dict(dataset={"kind": "synth", "snr": 10.0, "seed": 0})
    base.update(overrides)
    return PipelineConfig(**base)


# --- config validation ---

def test_from_json_rejects_unknown_fields():
    with pytest.raises(ConfigInvalid):
        PipelineConfig.from_json('{"dataset": {"kind": "synth"}, "oops": 1}')
    with pytest.raises(ConfigInvalid):
        PipelineConfig.from_json('{"task": "multiclass_words"}')


def test_validate_rejects_bad_values(tmp_path):
    with pytest.raises(ConfigInvalid):
        _config(task="bogus").validate()
    with pytest.raises(ConfigInvalid):
        _config(regime="bogus").validate()
    with pytest.raises(ConfigInvalid):
        _config(classifier="bogus").validate()
    with pytest.raises(ConfigInvalid):
        _config(selection={"kind": "bogus"}).validate()
    with pytest.raises(ConfigInvalid):
        _config(regime="raw_all", classifier="svm").validate()
    with pytest.raises(ConfigInvalid):
        _config(regime="raw_all", classifier="bilstm",
                selection={"kind": "pca"}).validate()
    with pytest.raises(ConfigInvalid):
        _config(eval={"kind": "loocv"}).validate()
    with pytest.raises(ConfigInvalid):
        _config(profile="bogus").validate()
    with pytest.raises(ConfigInvalid):
        _config(dataset={"kind": "files", "paths": {}}).validate()
    with pytest.raises(ConfigInvalid):
        _config(dataset={"kind": "files",
                         "paths": {"s": str(tmp_path / "nope")}}).validate()
    _config().validate()  # default synth config is fine


def test_fingerprint_ignores_out_dir():
    a = _config(out_dir="x")
    b = _config(out_dir="y")
    assert a.fingerprint() == b.fingerprint()
    c = _config(seed=1)
    assert a.fingerprint() != c.fingerprint()
    assert len(a.fingerprint()) == 16


# --- composed per-fold models ---

def _blob_features(seed=0, n=40):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(c, 0.3, (n, 6)) for c in range(3)])
    y = np.repeat(np.arange(3), n)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


def test_feature_model_pca():
    X, y = _blob_features()
    m = FeatureModel(lambda: GbtClassifier(n_rounds=10), selection="pca",
                     selection_param=0.99).fit(X, y)
    assert (m.predict(X) == y).mean() > 0.9
    assert m.pca_.n_components <= 6


def test_feature_model_gain():
    X, y = _blob_features()
    X = np.hstack([X, np.random.default_rng(1).standard_normal((len(y), 3))])
    m = FeatureModel(lambda: GbtClassifier(n_rounds=10), selection="gain",
                     selection_param=0.95).fit(X, y)
    assert (m.predict(X) == y).mean() > 0.9
    assert m.columns_ is not None and len(m.columns_) < X.shape[1]


def test_feature_model_fixed_columns():
    X, y = _blob_features()
    m = FeatureModel(lambda: GbtClassifier(n_rounds=10),
                     fixed_columns=[0, 2]).fit(X, y)
    np.testing.assert_array_equal(m.columns_, [0, 2])
    assert (m.predict(X) == y).mean() > 0.8


def _tiny_raw_set():
    spec = SynthSpec(
        n_classes=2, n_trials_per_class=10, n_channels=4,
        sampling_rate_hz=254.0, duration_s=1.0,
        class_signatures=(
            (Injection(channel=0, freq_hz=10.0, amplitude=6.0),),
            (Injection(channel=0, freq_hz=21.0, amplitude=6.0),),
        ),
        noise_sigma=1.0, seed=0, class_names=("a", "b"),
        channel_names=("F3", "F4", "C3", "C4"))
    return generate(spec)


def test_raw_channel_select_model():
    from innerspeech.nets import shape_input
    es = _tiny_raw_set()
    X = shape_input("raw_all", es)
    y = es.labels
    m = RawChannelSelectModel(
        lambda: GbtFlatten(), es.sampling_rate_hz,
        [c.name for c in es.channels], threshold=0.95).fit(X, y)
    # the discriminative channel must survive selection
    assert 0 in m.channel_idx_
    assert len(m.channel_idx_) < 4
    assert m.predict(X).shape == y.shape


class GbtFlatten:
    """Simple sequence classifier stub: band-agnostic GBT on flattened input."""

    def fit(self, X, y):
        self._gbt = GbtClassifier(n_rounds=5, max_depth=2)
        self._gbt.fit(X.reshape(len(X), -1), y)
        return self

    def predict(self, X):
        return self._gbt.predict(X.reshape(len(X), -1))


# --- run() + gain_intersect + cache ---

def _two_subject_paths(tmp_path):
    from innerspeech.core import save_epochset
    paths = {}
    for i, seed in enumerate((0, 1)):
        spec = SynthSpec(
            n_classes=2, n_trials_per_class=10, n_channels=4,
            sampling_rate_hz=254.0, duration_s=1.0,
            class_signatures=(
                (Injection(channel=0, freq_hz=10.0, amplitude=6.0),),
                (Injection(channel=1, freq_hz=21.0, amplitude=6.0),),
            ),
            noise_sigma=1.0, seed=seed, class_names=("a", "b"),
            channel_names=("F3", "F4", "C3", "C4"))
        base = str(tmp_path / f"sub{i}")
        save_epochset(generate(spec), base)
        paths[f"sub-{i:02d}"] = base
    return paths


def test_run_gain_intersect_two_subjects(tmp_path):
    cfg = _config(
        dataset={"kind": "files", "paths": _two_subject_paths(tmp_path)},
        classifier="gbt", classifier_params={"n_rounds": 10},
        selection={"kind": "gain_intersect", "param": 0.95},
        eval={"kind": "kfold", "k": 2},
        out_dir=str(tmp_path / "out"))
    report = run(cfg)
    assert set(report.subjects) == {"sub-00", "sub-01"}
    assert report.average.accuracy > 0.7
    assert (tmp_path / "out" / "report.json").exists()


def test_run_gain_intersect_single_subject_warns(tmp_path):
    paths = _two_subject_paths(tmp_path)
    cfg = _config(
        dataset={"kind": "files", "paths": {"sub-00": paths["sub-00"]}},
        classifier="gbt", classifier_params={"n_rounds": 10},
        selection={"kind": "gain_intersect"},
        eval={"kind": "kfold", "k": 2},
        out_dir=str(tmp_path / "out"))
    with pytest.warns(UserWarning):
        run(cfg)


def test_feature_cache(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("INNERSPEECH_CACHE", str(cache))
    paths = _two_subject_paths(tmp_path)
    cfg = _config(
        dataset={"kind": "files", "paths": {"sub-00": paths["sub-00"]}},
        classifier="gbt", classifier_params={"n_rounds": 5},
        eval={"kind": "kfold", "k": 2},
        out_dir=str(tmp_path / "out1"))
    r1 = run(cfg)
    assert list(cache.glob("*.npz"))
    cfg2 = _config(
        dataset={"kind": "files", "paths": {"sub-00": paths["sub-00"]}},
        classifier="gbt", classifier_params={"n_rounds": 5},
        eval={"kind": "kfold", "k": 2},
        out_dir=str(tmp_path / "out2"))
    r2 = run(cfg2)  # second run hits the cache
    assert r1.subjects["sub-00"].accuracy == r2.subjects["sub-00"].accuracy


def test_report_json_roundtrip(tmp_path):
    paths = _two_subject_paths(tmp_path)
    cfg = _config(
        dataset={"kind": "files", "paths": {"sub-00": paths["sub-00"]}},
        classifier="gbt", classifier_params={"n_rounds": 5},
        eval={"kind": "kfold", "k": 2},
        out_dir=str(tmp_path / "out"))
    report = run(cfg)
    path = tmp_path / "copy.json"
    save_report_json(report, str(path))
    loaded = load_report_json(str(path))
    assert loaded.subjects.keys() == report.subjects.keys()
    assert loaded.subjects["sub-00"].accuracy == report.subjects["sub-00"].accuracy
    assert loaded.config_fingerprint == report.config_fingerprint
