"""Kernel SVM trained with SMO, multiclass via one-vs-one voting."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import (
    DimensionMismatch,
    NonFiniteFeature,
    SingleClassData,
    UntrainedModel,
)


def _rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    aa = np.sum(A * A, axis=1)[:, None]
    bb = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(aa + bb - 2.0 * A @ B.T, 0.0)
    return np.exp(-gamma * d2)


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_passes: int,
         rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Simplified SMO on a precomputed kernel matrix; y in {-1, +1}.

    Iterates until ``max_passes`` consecutive sweeps change no pair, which
    leaves every KKT violation below ``tol``.
    """
    n = len(y)
    alpha = np.zeros(n)
    b = 0.0

    def try_pair(i: int, j: int, Ei: float) -> bool:
        nonlocal b
        Ej = (alpha * y) @ K[:, j] + b - y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            L, H = max(0.0, aj_old - ai_old), min(C, C + aj_old - ai_old)
        else:
            L, H = max(0.0, ai_old + aj_old - C), min(C, ai_old + aj_old)
        if H - L < 1e-12:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= -1e-12:
            return False
        aj = float(np.clip(aj_old - y[j] * (Ei - Ej) / eta, L, H))
        if abs(aj - aj_old) < 1e-8:
            return False
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        alpha[i], alpha[j] = ai, aj
        b1 = b - Ei - y[i] * (ai - ai_old) * K[i, i] - y[j] * (aj - aj_old) * K[i, j]
        b2 = b - Ej - y[i] * (ai - ai_old) * K[i, j] - y[j] * (aj - aj_old) * K[j, j]
        if 0 < ai < C:
            b = b1
        elif 0 < aj < C:
            b = b2
        else:
            b = 0.5 * (b1 + b2)
        return True

    passes = 0
    sweeps = 0
    max_sweeps = max(200, 40 * max_passes)
    while passes < max_passes and sweeps < max_sweeps:
        changed = 0
        sweeps += 1
        for i in range(n):
            Ei = (alpha * y) @ K[:, i] + b - y[i]
            if (y[i] * Ei < -tol and alpha[i] < C) or (y[i] * Ei > tol and alpha[i] > 0):
                # second-choice heuristic: largest |Ei - Ej| first, then the
                # rest in seeded random order until one pair makes progress
                E = (alpha * y) @ K + b - y
                candidates = np.argsort(-np.abs(E - Ei), kind="stable")
                extras = rng.permutation(n)
                for j in list(candidates[:8]) + list(extras):
                    if j == i:
                        continue
                    if try_pair(i, int(j), Ei):
                        changed += 1
                        break
        passes = passes + 1 if changed == 0 else 0
    return alpha, b


def _kkt_residual(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, b: float,
                  C: float) -> float:
    """Worst-case KKT violation of the dual solution on its own training set."""
    f = (alpha * y) @ K + b
    margin = y * f
    res = np.zeros_like(margin)
    free = (alpha > 1e-8) & (alpha < C - 1e-8)
    at_zero = alpha <= 1e-8
    at_c = alpha >= C - 1e-8
    res[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    res[free] = np.abs(1.0 - margin[free])
    res[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
    return float(res.max(initial=0.0))


@dataclass
class _PairModel:
    pos: int  # class index mapped to +1
    neg: int  # class index mapped to -1
    sv: np.ndarray  # support vectors
    coef: np.ndarray  # alpha_i * y_i at the support vectors
    bias: float


class SvmClassifier(ClassifierMixin, BaseEstimator):
    """One-vs-one kernel SVM; ties broken by summed decision margin.

    Deterministic for a fixed seed and data order.
    """

    def __init__(self, C: float = 1.0, kernel: str = "rbf",
                 gamma: "float | str" = "scale", tol: float = 1e-3,
                 max_passes: int = 5, seed: int = 0):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.seed = seed

    def _gamma_value(self, X: np.ndarray) -> float:
        if self.gamma == "scale":
            v = X.var()
            return 1.0 / (X.shape[1] * v) if v > 0 else 1.0
        return float(self.gamma)

    def _kernel_fn(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kernel == "linear":
            return A @ B.T
        if self.kernel == "rbf":
            return _rbf_kernel(A, B, self.gamma_)
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if not np.isfinite(X).all():
            raise NonFiniteFeature("X contains NaN/Inf")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise SingleClassData("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        self.gamma_ = self._gamma_value(X)
        self.pairs_ = []
        residuals = []
        rng = np.random.default_rng(self.seed)
        for a in range(len(self.classes_)):
            for bidx in range(a + 1, len(self.classes_)):
                ca, cb = self.classes_[a], self.classes_[bidx]
                mask = (y == ca) | (y == cb)
                Xp = X[mask]
                yp = np.where(y[mask] == ca, 1.0, -1.0)
                K = self._kernel_fn(Xp, Xp)
                alpha, bias = _smo(K, yp, self.C, self.tol, self.max_passes, rng)
                residuals.append(_kkt_residual(K, yp, alpha, bias, self.C))
                sv_mask = alpha > 1e-8
                self.pairs_.append(_PairModel(
                    pos=int(ca), neg=int(cb),
                    sv=Xp[sv_mask], coef=(alpha * yp)[sv_mask], bias=bias))
        self.kkt_residual_ = max(residuals)
        return self

    def _check_fitted(self, X: np.ndarray):
        if not hasattr(self, "pairs_"):
            raise UntrainedModel("fit() has not been called")
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}")

    def decision_function(self, X) -> np.ndarray:
        """Pairwise margins, one column per (pos, neg) class pair."""
        X = np.asarray(X, dtype=np.float64)
        self._check_fitted(X)
        cols = []
        for pm in self.pairs_:
            if len(pm.sv) == 0:
                cols.append(np.full(len(X), pm.bias))
            else:
                cols.append(self._kernel_fn(X, pm.sv) @ pm.coef + pm.bias)
        return np.stack(cols, axis=1)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        self._check_fitted(X)
        scores = self.decision_function(X)
        n_classes = len(self.classes_)
        votes = np.zeros((len(X), n_classes))
        margins = np.zeros((len(X), n_classes))
        class_pos = {int(c): i for i, c in enumerate(self.classes_)}
        for col, pm in enumerate(self.pairs_):
            s = scores[:, col]
            ip, ineg = class_pos[pm.pos], class_pos[pm.neg]
            votes[s >= 0, ip] += 1
            votes[s < 0, ineg] += 1
            margins[:, ip] += s
            margins[:, ineg] -= s
        # ties in vote count fall back to the larger summed margin
        best = votes + 1e-9 * np.tanh(margins)
        return self.classes_[np.argmax(best, axis=1)]

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "kind": "svm",
            "kernel": self.kernel,
            "gamma": self.gamma_,
            "C": self.C,
            "classes": self.classes_.tolist(),
            "pairs": [
                {"pos": pm.pos, "neg": pm.neg, "bias": pm.bias,
                 "coef": pm.coef.tolist(), "sv": pm.sv.tolist()}
                for pm in self.pairs_
            ],
        })

    @classmethod
    def from_json(cls, text: str) -> "SvmClassifier":
        d = json.loads(text)
        m = cls(C=d["C"], kernel=d["kernel"], gamma=d["gamma"])
        m.gamma_ = d["gamma"]
        m.classes_ = np.array(d["classes"])
        m.pairs_ = [
            _PairModel(pos=p["pos"], neg=p["neg"], bias=p["bias"],
                       coef=np.array(p["coef"]), sv=np.array(p["sv"]))
            for p in d["pairs"]
        ]
        m.n_features_in_ = m.pairs_[0].sv.shape[1] if len(m.pairs_[0].sv) else 0
        return m
