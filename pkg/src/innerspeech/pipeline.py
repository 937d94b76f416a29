"""Experiment runner: config parsing and validation, per-fold composed models
(scaling -> selection -> classifier), cross-validation dispatch and report
emission. Reruns of the same config and seed reproduce identical reports."""
from __future__ import annotations

import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import dsp
from .core import EpochSet, left_hemisphere, load_epochset, select_channels
from .evaluate import (
    EvalReport,
    Metrics,
    emit_report,
    kfold_evaluate,
    mean_metrics,
    nested_cv,
    chance_level,
)
from .exceptions import ConfigInvalid
from .features import (
    build_feature_matrix,
    columns_to_channels,
    intersect_selected,
    pca_fit,
    select_by_gain,
)
from .gbt import GbtClassifier
from .nets import BilstmClassifier, LstmClassifier, shape_input
from .svm import SvmClassifier

TASKS = ("binary_rest_action", "multiclass_words")
REGIMES = ("psd_features", "raw_all", "raw_selected")
CLASSIFIERS = ("svm", "gbt", "lstm", "bilstm")
SELECTIONS = ("none", "pca", "gain", "gain_intersect", "left_hemisphere")
RAW_REGIMES = ("raw_all", "raw_selected")
NET_CLASSIFIERS = ("lstm", "bilstm")


@dataclass
class PipelineConfig:
    dataset: dict  # {"kind": "synth", "snr": .., "seed": ..} or {"kind": "files", "paths": {subject: base}}
    task: str = "multiclass_words"
    regime: str = "psd_features"
    classifier: str = "gbt"
    classifier_params: dict = field(default_factory=dict)
    selection: dict = field(default_factory=lambda: {"kind": "none"})
    eval: dict = field(default_factory=lambda: {"kind": "kfold", "k": 4})
    profile: str | None = None
    seed: int = 0
    out_dir: str = "out"

    @staticmethod
    def from_json(text: str) -> "PipelineConfig":
        d = json.loads(text)
        known = {f for f in PipelineConfig.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigInvalid(f"unknown config fields: {sorted(extra)}")
        if "dataset" not in d:
            raise ConfigInvalid("config must name a dataset")
        return PipelineConfig(**d)

    def semantic_dict(self) -> dict:
        """Fields that change results; out_dir is presentation-only."""
        return {
            "dataset": self.dataset,
            "task": self.task,
            "regime": self.regime,
            "classifier": self.classifier,
            "classifier_params": self.classifier_params,
            "selection": self.selection,
            "eval": self.eval,
            "profile": self.profile,
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigInvalid(f"task must be one of {TASKS}")
        if self.regime not in REGIMES:
            raise ConfigInvalid(f"regime must be one of {REGIMES}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigInvalid(f"classifier must be one of {CLASSIFIERS}")
        if self.selection.get("kind", "none") not in SELECTIONS:
            raise ConfigInvalid(f"selection kind must be one of {SELECTIONS}")
        if self.regime in RAW_REGIMES and self.classifier not in NET_CLASSIFIERS:
            raise ConfigInvalid(
                f"regime {self.regime} requires an lstm/bilstm classifier")
        if self.regime in RAW_REGIMES and self.selection.get("kind") in ("pca", "gain"):
            raise ConfigInvalid("pca/gain selection applies to psd_features only")
        if self.eval.get("kind") not in ("kfold", "nested"):
            raise ConfigInvalid("eval kind must be kfold or nested")
        if self.profile is not None and self.profile not in dsp.PROFILES:
            raise ConfigInvalid(f"unknown preprocess profile {self.profile!r}")
        kind = self.dataset.get("kind")
        if kind == "files":
            paths = self.dataset.get("paths") or {}
            if not paths:
                raise ConfigInvalid("dataset.paths is empty")
            for subject, base in paths.items():
                for ext in (".json", ".f32"):
                    if not os.path.exists(_strip(base) + ext):
                        raise ConfigInvalid(
                            f"dataset file missing for {subject}: {_strip(base)}{ext}")
        elif kind != "synth":
            raise ConfigInvalid("dataset.kind must be 'synth' or 'files'")


def _strip(base: str) -> str:
    for ext in (".json", ".f32"):
        if base.endswith(ext):
            return base[: -len(ext)]
    return base


# --------------------------------------------------------------------------
# Composed per-fold models (fit on train rows only, so CV stays leakage-free)

class FeatureModel(BaseEstimator):
    """z-score -> optional selection (pca / gain / fixed columns) -> classifier,
    with every stage fit on the training rows only."""

    def __init__(self, make_classifier, selection="none", selection_param=0.95,
                 fixed_columns=None, as_sequence=False, seed=0):
        self.make_classifier = make_classifier
        self.selection = selection
        self.selection_param = selection_param
        self.fixed_columns = fixed_columns
        self.as_sequence = as_sequence
        self.seed = seed

    def _project(self, X):
        X = (X - self.mean_) / self.std_
        if self.selection == "pca":
            X = (X - self.pca_.mean) @ self.pca_.components.T
        elif self.columns_ is not None:
            X = X[:, self.columns_]
        if self.as_sequence:
            X = X[:, :, None]
        return X

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        self.std_ = X.std(axis=0)
        self.std_[self.std_ == 0] = 1.0
        Xn = (X - self.mean_) / self.std_
        self.columns_ = None
        if self.selection == "pca":
            self.pca_ = pca_fit(Xn, self.selection_param)
        elif self.selection == "gain":
            probe = GbtClassifier(n_rounds=30, max_depth=3)
            probe.fit(Xn, y)
            self.columns_ = np.array(
                select_by_gain(probe.feature_gains_, self.selection_param))
        elif self.fixed_columns is not None:
            self.columns_ = np.asarray(self.fixed_columns)
        self.clf_ = self.make_classifier()
        self.clf_.fit(self._project(X), y)
        return self

    def predict(self, X):
        return self.clf_.predict(self._project(np.asarray(X, dtype=np.float64)))


class RawChannelSelectModel(BaseEstimator):
    """The raw_selected regime: on the training rows, rank (channel, band)
    band-power features with tree gain, keep the owning channels, then train
    the sequence classifier on those channels only."""

    def __init__(self, make_classifier, sampling_rate_hz, channel_names,
                 bands=None, threshold=0.95):
        self.make_classifier = make_classifier
        self.sampling_rate_hz = sampling_rate_hz
        self.channel_names = channel_names
        self.bands = bands
        self.threshold = threshold

    def _band_power(self, X):
        from .dsp import DEFAULT_BANDS, relative_band_power, welch_psd
        bands = self.bands or DEFAULT_BANDS
        rows = []
        for ep in X:  # ep: (T, C)
            row = []
            for ch in range(ep.shape[1]):
                psd = welch_psd(ep[:, ch], self.sampling_rate_hz)
                row.append(relative_band_power(psd, bands))
            rows.append(np.concatenate(row))
        return np.array(rows)

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        bands = self.bands or dsp.DEFAULT_BANDS
        fm = self._band_power(X)
        probe = GbtClassifier(n_rounds=30, max_depth=3)
        probe.fit(fm, y)
        selected = select_by_gain(probe.feature_gains_, self.threshold)
        provenance = [(self.channel_names[c], b.name)
                      for c in range(X.shape[2]) for b in bands]
        names = columns_to_channels(selected, provenance)
        self.channel_idx_ = np.array(
            sorted(i for i, n in enumerate(self.channel_names) if n in names))
        self.clf_ = self.make_classifier()
        self.clf_.fit(X[:, :, self.channel_idx_], y)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return self.clf_.predict(X[:, :, self.channel_idx_])


# --------------------------------------------------------------------------
# Classifier factories

def _classifier_factory(name: str, params: dict, seed: int):
    def make():
        if name == "svm":
            return SvmClassifier(seed=seed, **params)
        if name == "gbt":
            return GbtClassifier(**params)
        if name == "lstm":
            return LstmClassifier(seed=seed, **params)
        if name == "bilstm":
            return BilstmClassifier(seed=seed, **params)
        raise ConfigInvalid(f"unknown classifier {name!r}")
    return make


def _bands_for(config: PipelineConfig):
    if config.profile == "imagined-speech":
        return (dsp.ALPHA, dsp.BETA, dsp.GAMMA_NARROW)
    return dsp.DEFAULT_BANDS


def _load_datasets(config: PipelineConfig) -> dict[str, EpochSet]:
    if config.dataset["kind"] == "synth":
        from .synth import default_4class
        return {"synthetic": default_4class(config.dataset.get("snr", 10.0),
                                            config.dataset.get("seed", config.seed))}
    return {subject: load_epochset(_strip(base))
            for subject, base in sorted(config.dataset["paths"].items())}


def _cached_features(es: EpochSet, bands, config: PipelineConfig, subject: str):
    """Content-addressed band-power cache under $INNERSPEECH_CACHE."""
    cache_dir = os.environ.get("INNERSPEECH_CACHE")
    key = None
    if cache_dir:
        h = hashlib.sha256()
        h.update(es.tensor().tobytes())
        h.update(json.dumps([(b.name, b.low_hz, b.high_hz) for b in bands]).encode())
        key = os.path.join(cache_dir, h.hexdigest()[:24] + ".npz")
        if os.path.exists(key):
            with np.load(key) as z:
                return z["values"]
    fm = build_feature_matrix(es, bands)
    if key:
        os.makedirs(cache_dir, exist_ok=True)
        np.savez(key, values=fm.values)
    return fm.values


def _subject_selection_columns(config, features_by_subject, labels_by_subject,
                               subject):
    """Cross-subject gain intersection, leave-one-subject-out so the evaluated
    subject's own data never drives its selection. Single-subject runs fall
    back to per-fold gain selection with a warning."""
    others = [s for s in features_by_subject if s != subject]
    if not others:
        warnings.warn("gain_intersect with one subject falls back to per-fold "
                      "gain selection")
        return None
    threshold = config.selection.get("param", 0.95)
    per_subject = []
    for s in others:
        probe = GbtClassifier(n_rounds=30, max_depth=3)
        probe.fit(features_by_subject[s], labels_by_subject[s])
        per_subject.append(select_by_gain(probe.feature_gains_, threshold))
    cols = intersect_selected(per_subject)
    return np.array(cols) if cols else None


def run(config: PipelineConfig) -> EvalReport:
    """Execute dataset -> preprocess -> feature/shape -> select -> CV -> report."""
    config.validate()
    datasets = _load_datasets(config)
    bands = _bands_for(config)
    eval_cfg = config.eval
    sel_kind = config.selection.get("kind", "none")
    sel_param = config.selection.get("param", 0.95)
    subjects_metrics: dict[str, Metrics] = {}

    features_by_subject, labels_by_subject = {}, {}
    if config.regime == "psd_features":
        for subject, es in datasets.items():
            es = _prepare(es, config)
            datasets[subject] = es
            features_by_subject[subject] = _cached_features(es, bands, config, subject)
            labels_by_subject[subject] = es.labels
    else:
        datasets = {s: _prepare(es, config) for s, es in datasets.items()}

    for subject, es in datasets.items():
        make_clf = None

        def build(params, subject=subject, es=es):
            merged = dict(config.classifier_params)
            merged.update(params)
            make = _classifier_factory(config.classifier, merged, config.seed)
            if config.regime == "psd_features":
                fixed = None
                if sel_kind == "gain_intersect":
                    fixed = _subject_selection_columns(
                        config, features_by_subject, labels_by_subject, subject)
                selection = {"none": "none", "left_hemisphere": "none",
                             "pca": "pca", "gain": "gain",
                             "gain_intersect": "gain" if fixed is None else "none",
                             }[sel_kind]
                return FeatureModel(
                    make, selection=selection, selection_param=sel_param,
                    fixed_columns=fixed,
                    as_sequence=config.classifier in NET_CLASSIFIERS,
                    seed=config.seed)
            if config.regime == "raw_selected":
                return RawChannelSelectModel(
                    make, es.sampling_rate_hz,
                    [c.name for c in es.channels], bands=bands,
                    threshold=sel_param)
            return make()

        if config.regime == "psd_features":
            X = features_by_subject[subject]
            y = labels_by_subject[subject]
        else:
            X = shape_input(config.regime, es)
            y = es.labels

        if eval_cfg["kind"] == "nested":
            result = nested_cv(X, y, build, eval_cfg.get("grid") or [{}],
                               outer_k=eval_cfg.get("outer_k", 4),
                               inner_k=eval_cfg.get("inner_k", 3),
                               seed=config.seed)
            subjects_metrics[subject] = result.mean
        else:
            folds = kfold_evaluate(X, y, build, {}, k=eval_cfg.get("k", 4),
                                   seed=config.seed)
            subjects_metrics[subject] = mean_metrics(folds)

    n_classes = len(next(iter(datasets.values())).class_names)
    report = EvalReport(subjects=subjects_metrics,
                        chance=chance_level(n_classes),
                        config_fingerprint=config.fingerprint())
    os.makedirs(config.out_dir, exist_ok=True)
    emit_report(report, config.out_dir)
    save_report_json(report, os.path.join(config.out_dir, "report.json"))
    return report


def _prepare(es: EpochSet, config: PipelineConfig) -> EpochSet:
    if config.profile is not None:
        es = dsp.preprocess_epochset(es, dsp.PROFILES[config.profile])
    if config.selection.get("kind") == "left_hemisphere":
        es = select_channels(es, left_hemisphere)
    if config.task == "binary_rest_action" and tuple(es.class_names) != ("rest", "action"):
        raise ConfigInvalid(
            "binary_rest_action task needs a rest/action labeled dataset "
            "(see split_rest_action)")
    return es


# --------------------------------------------------------------------------
# Report (de)serialization

def _metrics_to_dict(m: Metrics) -> dict:
    return {"accuracy": m.accuracy, "precision": m.macro_precision,
            "recall": m.macro_recall, "f1": m.macro_f1,
            "confusion": m.confusion.tolist()}


def _metrics_from_dict(d: dict) -> Metrics:
    return Metrics(accuracy=d["accuracy"], macro_precision=d["precision"],
                   macro_recall=d["recall"], macro_f1=d["f1"],
                   confusion=np.array(d["confusion"]))


def save_report_json(report: EvalReport, path: str) -> None:
    doc = {
        "subjects": {s: _metrics_to_dict(m) for s, m in report.subjects.items()},
        "chance": report.chance,
        "config_fingerprint": report.config_fingerprint,
        "comparison": list(report.comparison),
        "windows": list(report.windows),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)


def load_report_json(path: str) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return EvalReport(
        subjects={s: _metrics_from_dict(m) for s, m in doc["subjects"].items()},
        chance=doc["chance"], config_fingerprint=doc["config_fingerprint"],
        comparison=[tuple(r) for r in doc["comparison"]],
        windows=[tuple(r) for r in doc["windows"]])
