"""Gradient-boosted regression trees with softmax multiclass objective,
exact greedy splits and per-feature gain accounting."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import DimensionMismatch, NonFiniteFeature, SingleClassData, UntrainedModel
from .features import ImportanceReport


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    leaf_value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf_value": self.leaf_value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @staticmethod
    def from_dict(d: dict) -> "_Node":
        if "leaf_value" in d and "feature" not in d:
            return _Node(leaf_value=d["leaf_value"])
        return _Node(feature=d["feature"], threshold=d["threshold"],
                     left=_Node.from_dict(d["left"]),
                     right=_Node.from_dict(d["right"]))


def _split_gain(gl: float, hl: float, gr: float, hr: float, lam: float) -> float:
    """Second-order gain of splitting a node: half the improvement of the
    regularized score."""
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                  - (gl + gr) ** 2 / (hl + hr + lam))


def _build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, idx: np.ndarray,
                depth: int, max_depth: int, lam: float,
                gain_acc: np.ndarray) -> _Node:
    G, H = g[idx].sum(), h[idx].sum()
    if depth >= max_depth or len(idx) < 2:
        return _Node(leaf_value=-G / (H + lam))
    best_gain = 1e-12
    best = None  # (feature, threshold, left_idx, right_idx)
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sg = np.cumsum(g[idx][order])
        sh = np.cumsum(h[idx][order])
        # candidate cuts between distinct consecutive sorted values
        distinct = np.nonzero(sv[1:] > sv[:-1])[0]
        for cut in distinct:
            gl, hl = sg[cut], sh[cut]
            gain = _split_gain(gl, hl, G - gl, H - hl, lam)
            if gain > best_gain:
                best_gain = gain
                thr = 0.5 * (sv[cut] + sv[cut + 1])
                best = (f, thr, idx[order[:cut + 1]], idx[order[cut + 1:]])
    if best is None:
        return _Node(leaf_value=-G / (H + lam))
    f, thr, li, ri = best
    gain_acc[f] += best_gain
    return _Node(feature=f, threshold=thr,
                 left=_build_tree(X, g, h, li, depth + 1, max_depth, lam, gain_acc),
                 right=_build_tree(X, g, h, ri, depth + 1, max_depth, lam, gain_acc))


def _predict_tree(node: _Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, rows = stack.pop()
        if nd.is_leaf:
            out[rows] = nd.leaf_value
        else:
            mask = X[rows, nd.feature] <= nd.threshold
            stack.append((nd.left, rows[mask]))
            stack.append((nd.right, rows[~mask]))
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GbtClassifier(ClassifierMixin, BaseEstimator):
    """Multiclass boosting: one regression tree per class per round, fit to
    softmax gradient/hessian statistics. Fully deterministic."""

    def __init__(self, n_rounds: int = 100, max_depth: int = 3,
                 learning_rate: float = 0.3, reg_lambda: float = 1.0):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if not np.isfinite(X).all():
            raise NonFiniteFeature("X contains NaN/Inf")
        self.classes_ = np.unique(y)
        K = len(self.classes_)
        if K < 2:
            raise SingleClassData("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        class_pos = {int(c): i for i, c in enumerate(self.classes_)}
        Y = np.zeros((len(y), K))
        for i, yi in enumerate(y):
            Y[i, class_pos[int(yi)]] = 1.0
        logits = np.zeros((len(y), K))
        self.trees_ = []  # list of rounds, each a list of K trees
        self.feature_gains_ = np.zeros(X.shape[1])
        self.train_loss_ = []
        for _ in range(self.n_rounds):
            P = _softmax(logits)
            round_trees = []
            for k in range(K):
                g = P[:, k] - Y[:, k]
                h = np.maximum(P[:, k] * (1.0 - P[:, k]), 1e-16)
                tree = _build_tree(X, g, h, np.arange(len(y)), 0,
                                   self.max_depth, self.reg_lambda,
                                   self.feature_gains_)
                logits[:, k] += self.learning_rate * _predict_tree(tree, X)
                round_trees.append(tree)
            self.trees_.append(round_trees)
            P = _softmax(logits)
            probs_true = np.clip((P * Y).sum(axis=1), 1e-12, None)
            self.train_loss_.append(float(-np.log(probs_true).mean()))
        return self

    def _raw_scores(self, X: np.ndarray) -> np.ndarray:
        K = len(self.classes_)
        logits = np.zeros((len(X), K))
        for round_trees in self.trees_:
            for k, tree in enumerate(round_trees):
                logits[:, k] += self.learning_rate * _predict_tree(tree, X)
        return logits

    def _check(self, X: np.ndarray):
        if not hasattr(self, "trees_"):
            raise UntrainedModel("fit() has not been called")
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}")

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        self._check(X)
        return _softmax(self._raw_scores(X))

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def importances(self, threshold: float = 0.95) -> ImportanceReport:
        """Per-feature total split gain, normalized; ``selected`` is the smallest
        prefix of sorted features reaching the cumulative threshold."""
        if not hasattr(self, "feature_gains_"):
            raise UntrainedModel("fit() has not been called")
        from .features import select_by_gain
        total = self.feature_gains_.sum()
        gains = self.feature_gains_ / total if total > 0 else self.feature_gains_.copy()
        selected = select_by_gain(self.feature_gains_, threshold) if total > 0 else ()
        return ImportanceReport(gains=gains, selected=selected, threshold=threshold)

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "kind": "gbt",
            "classes": self.classes_.tolist(),
            "learning_rate": self.learning_rate,
            "reg_lambda": self.reg_lambda,
            "max_depth": self.max_depth,
            "feature_gains": self.feature_gains_.tolist(),
            "n_features": self.n_features_in_,
            "trees": [[t.to_dict() for t in rnd] for rnd in self.trees_],
        })

    @classmethod
    def from_json(cls, text: str) -> "GbtClassifier":
        d = json.loads(text)
        m = cls(n_rounds=len(d["trees"]), max_depth=d["max_depth"],
                learning_rate=d["learning_rate"], reg_lambda=d["reg_lambda"])
        m.classes_ = np.array(d["classes"])
        m.n_features_in_ = d["n_features"]
        m.feature_gains_ = np.array(d["feature_gains"])
        m.trees_ = [[_Node.from_dict(t) for t in rnd] for rnd in d["trees"]]
        m.train_loss_ = []
        return m
