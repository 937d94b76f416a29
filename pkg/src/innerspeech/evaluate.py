"""K-fold and nested cross-validation, classification metrics, per-subject
aggregation and report emission (CSV tables + SVG accuracy chart)."""
from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import IoFailure, LeakageError, LengthMismatch, TooFewSamples


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray  # epoch index -> fold id
    stratified: bool
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments != fold)[0]


def kfold(n_epochs: int, labels: Sequence[int] | None = None, k: int = 4,
          stratified: bool = True, seed: int = 0) -> FoldPlan:
    """Deterministic fold plan; test fold sizes are floor(n/k) or ceil(n/k),
    and per-class sizes differ by at most 1 when stratified."""
    if n_epochs < k:
        raise TooFewSamples(f"cannot split {n_epochs} epochs into {k} folds")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n_epochs, dtype=np.int64)
    if stratified:
        if labels is None:
            raise ValueError("stratified split needs labels")
        labels = np.asarray(labels)
        counts = {c: int((labels == c).sum()) for c in np.unique(labels)}
        if min(counts.values()) < k:
            raise TooFewSamples(
                f"smallest class has {min(counts.values())} epochs, need >= {k}")
        fold_totals = np.zeros(k, dtype=np.int64)
        for c in np.unique(labels):
            idx = np.nonzero(labels == c)[0]
            idx = idx[rng.permutation(len(idx))]
            base = len(idx) // k
            rem = len(idx) - base * k
            # remainders go to the currently smallest folds (ties: lower id)
            order = np.lexsort((np.arange(k), fold_totals))
            sizes = np.full(k, base)
            sizes[order[:rem]] += 1
            start = 0
            for f in range(k):
                assignments[idx[start:start + sizes[f]]] = f
                start += sizes[f]
            fold_totals += sizes
    else:
        perm = rng.permutation(n_epochs)
        sizes = np.full(k, n_epochs // k)
        sizes[: n_epochs % k] += 1
        start = 0
        for f in range(k):
            assignments[perm[start:start + sizes[f]]] = f
            start += sizes[f]
    return FoldPlan(k=k, assignments=assignments, stratified=stratified, seed=seed)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray  # n_classes x n_classes counts, true rows x predicted cols


def compute_metrics(y_true, y_pred, n_classes: int) -> Metrics:
    """Accuracy and macro-averaged precision/recall/F1 over all ``n_classes``
    classes; classes absent from ``y_true`` contribute 0 with a warning."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true vs {len(y_pred)} predicted")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        conf[t, p] += 1
    accuracy = float(np.trace(conf) / conf.sum()) if conf.sum() else 0.0
    precisions, recalls, f1s = [], [], []
    for c in range(n_classes):
        tp = conf[c, c]
        fp = conf[:, c].sum() - tp
        fn = conf[c, :].sum() - tp
        if conf[c, :].sum() == 0:
            warnings.warn(f"class {c} absent from y_true; counted as 0")
        prec = tp / (tp + fp) if (tp + fp) else 0.0
        rec = tp / (tp + fn) if (tp + fn) else 0.0
        f1 = 2 * prec * rec / (prec + rec) if (prec + rec) else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return Metrics(accuracy=accuracy,
                   macro_precision=float(np.mean(precisions)),
                   macro_recall=float(np.mean(recalls)),
                   macro_f1=float(np.mean(f1s)),
                   confusion=conf)


def chance_level(n_classes: int) -> float:
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    return 1.0 / n_classes


def mean_metrics(per_fold: Sequence[Metrics]) -> Metrics:
    """Arithmetic mean of fold metrics; confusions are summed."""
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in per_fold])),
        macro_precision=float(np.mean([m.macro_precision for m in per_fold])),
        macro_recall=float(np.mean([m.macro_recall for m in per_fold])),
        macro_f1=float(np.mean([m.macro_f1 for m in per_fold])),
        confusion=np.sum([m.confusion for m in per_fold], axis=0),
    )


# --------------------------------------------------------------------------
# Cross-validation drivers

Builder = Callable[[dict], object]  # params -> estimator with fit/predict


def _flat_rows(X: np.ndarray) -> np.ndarray:
    return X.reshape(len(X), -1)


def _assert_no_leakage(X, train_idx, test_idx):
    """Fires when any test row is byte-identical to a train row."""
    flat = _flat_rows(np.ascontiguousarray(X))
    train_hashes = {r.tobytes() for r in flat[train_idx]}
    for i in test_idx:
        if flat[i].tobytes() in train_hashes:
            raise LeakageError(f"test epoch {i} duplicated in training split")


def kfold_evaluate(X, y, build: Builder, params: dict, k: int = 4,
                   stratified: bool = True, seed: int = 0,
                   check_leakage: bool = False) -> list[Metrics]:
    """Plain k-fold CV of one configuration; returns per-fold metrics."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    n_classes = len(np.unique(y))
    plan = kfold(len(y), y, k=k, stratified=stratified, seed=seed)
    out = []
    for f in range(k):
        tr, te = plan.train_indices(f), plan.test_indices(f)
        if check_leakage:
            _assert_no_leakage(X, tr, te)
        model = build(params)
        model.fit(X[tr], y[tr])
        out.append(compute_metrics(y[te], model.predict(X[te]), n_classes))
    return out


@dataclass
class NestedCvResult:
    per_fold: list  # Metrics per outer fold
    chosen_params: list  # winning grid point per outer fold
    mean: Metrics = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = mean_metrics(self.per_fold)


def nested_cv(X, y, build: Builder, grid: Sequence[dict], outer_k: int = 4,
              inner_k: int = 3, seed: int = 0, stratified: bool = True,
              check_leakage: bool = False) -> NestedCvResult:
    """Outer folds estimate generalization; inner CV on the outer-train split
    picks the grid point with the highest mean inner validation accuracy
    (ties resolved by grid order). No outer-test datum touches fitting."""
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    n_classes = len(np.unique(y))
    plan = kfold(len(y), y, k=outer_k, stratified=stratified, seed=seed)
    per_fold, chosen = [], []
    for f in range(outer_k):
        tr, te = plan.train_indices(f), plan.test_indices(f)
        if check_leakage:
            _assert_no_leakage(X, tr, te)
        if len(grid) == 1:
            best_params = grid[0]
        else:
            inner_plan = kfold(len(tr), y[tr], k=inner_k,
                               stratified=stratified, seed=seed + 1)
            best_params, best_acc = None, -1.0
            for params in grid:
                accs = []
                for g in range(inner_k):
                    itr = tr[inner_plan.train_indices(g)]
                    ite = tr[inner_plan.test_indices(g)]
                    model = build(params)
                    model.fit(X[itr], y[itr])
                    accs.append(float((model.predict(X[ite]) == y[ite]).mean()))
                acc = float(np.mean(accs))
                if acc > best_acc + 1e-12:
                    best_acc, best_params = acc, params
        model = build(best_params)
        model.fit(X[tr], y[tr])
        per_fold.append(compute_metrics(y[te], model.predict(X[te]), n_classes))
        chosen.append(best_params)
    return NestedCvResult(per_fold=per_fold, chosen_params=chosen)


# --------------------------------------------------------------------------
# Reports

@dataclass
class EvalReport:
    subjects: dict  # subject id -> Metrics (mean over outer folds)
    chance: float
    config_fingerprint: str = ""
    comparison: list = field(default_factory=list)  # (classifier, input_type, accuracy)
    windows: list = field(default_factory=list)  # (window_start_s, accuracy)

    @property
    def average(self) -> Metrics:
        return mean_metrics(list(self.subjects.values()))


def emit_report(report: EvalReport, out_dir: str) -> list[str]:
    """Write subjects.csv, comparison.csv, windows.csv (when present) and an
    SVG accuracy bar chart with the chance line. Deterministic output."""
    if not report.subjects:
        raise IoFailure("report has no subjects")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "subjects.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "accuracy", "precision", "recall", "f1"])
        for sid in sorted(report.subjects):
            m = report.subjects[sid]
            w.writerow([sid] + [f"{v:.4f}" for v in
                                (m.accuracy, m.macro_precision, m.macro_recall,
                                 m.macro_f1)])
        avg = report.average
        w.writerow(["average"] + [f"{v:.4f}" for v in
                                  (avg.accuracy, avg.macro_precision,
                                   avg.macro_recall, avg.macro_f1)])
    written.append(path)

    if report.comparison:
        path = os.path.join(out_dir, "comparison.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["classifier", "input_type", "accuracy"])
            for clf, inp, acc in report.comparison:
                w.writerow([clf, inp, f"{acc:.4f}"])
        written.append(path)

    if report.windows:
        path = os.path.join(out_dir, "windows.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["window_start_s", "accuracy"])
            for start, acc in report.windows:
                w.writerow([f"{start:.3f}", f"{acc:.4f}"])
        written.append(path)

    path = os.path.join(out_dir, "accuracy.svg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_accuracy_svg(report))
    written.append(path)
    if report.config_fingerprint:
        path = os.path.join(out_dir, "fingerprint.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.config_fingerprint + "\n")
        written.append(path)
    return written


# chart geometry: fixed plot box so bar/line positions are pure functions of the values
_W, _H = 640, 400
_ML, _MR, _MT, _MB = 60, 20, 20, 50


def _y_for(acc: float) -> float:
    """SVG y coordinate of an accuracy value on the 0-100% axis."""
    plot_h = _H - _MT - _MB
    return _MT + plot_h * (1.0 - acc)


def render_accuracy_svg(report: EvalReport) -> str:
    """One bar per subject, horizontal red chance line, y axis 0-100%."""
    subjects = sorted(report.subjects)
    plot_w = _W - _ML - _MR
    slot = plot_w / len(subjects)
    bar_w = slot * 0.7
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _y_for(frac)
        parts.append(f'<line x1="{_ML}" y1="{y:.2f}" x2="{_W - _MR}" y2="{y:.2f}" '
                     'stroke="#dddddd"/>')
        parts.append(f'<text x="{_ML - 8}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-size="12">{int(frac * 100)}%</text>')
    for i, sid in enumerate(subjects):
        acc = report.subjects[sid].accuracy
        x = _ML + i * slot + (slot - bar_w) / 2
        y = _y_for(acc)
        h = _y_for(0.0) - y
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                     f'height="{h:.2f}" fill="#4878a8"/>')
        parts.append(f'<text x="{x + bar_w / 2:.2f}" y="{_H - _MB + 16}" '
                     f'text-anchor="middle" font-size="12">{sid}</text>')
    y = _y_for(report.chance)
    parts.append(f'<line x1="{_ML}" y1="{y:.2f}" x2="{_W - _MR}" y2="{y:.2f}" '
                 'stroke="red" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts)


# --------------------------------------------------------------------------
# Windowed binary analysis: per 0.5 s action-window position, train a binary
# SVM on (all rest epochs vs that window) and tabulate CV accuracy.

def windowed_binary_analysis(rest_set, action_set, bands=None, width_s: float = 0.5,
                             overlap_frac: float = 0.5, k: int = 4,
                             seed: int = 0, build: Builder | None = None) -> list:
    """Returns [(window_start_s, accuracy)] over sliding action windows."""
    from .dsp import DEFAULT_BANDS, sliding_windows
    from .features import build_feature_matrix
    from .svm import SvmClassifier
    from .core import EpochSet

    bands = bands or DEFAULT_BANDS
    if build is None:
        build = lambda params: SvmClassifier(seed=seed, **params)  # noqa: E731
    fs = action_set.sampling_rate_hz
    rest_fm = build_feature_matrix(rest_set, bands)
    per_epoch_windows = [sliding_windows(ep, fs, width_s, overlap_frac)
                         for ep in action_set.epochs]
    n_windows = min(len(w) for w in per_epoch_windows)
    out = []
    from .core import Epoch
    for w in range(n_windows):
        win_eps = tuple(
            Epoch(data=wins[w].data, label=1, interval=wins[w].interval,
                  subject_id=wins[w].subject_id)
            for wins in per_epoch_windows)
        win_set = EpochSet(epochs=win_eps, sampling_rate_hz=fs,
                           class_names=("rest", "action"),
                           channels=action_set.channels)
        win_fm = build_feature_matrix(win_set, bands)
        X = np.vstack([rest_fm.values, win_fm.values])
        y = np.concatenate([np.zeros(len(rest_fm.values), dtype=np.int64),
                            np.ones(len(win_fm.values), dtype=np.int64)])
        folds = kfold_evaluate(X, y, build, {}, k=k, seed=seed)
        start_s = per_epoch_windows[0][w].interval.start_s
        out.append((start_s, mean_metrics(folds).accuracy))
    return out
