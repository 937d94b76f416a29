"""From-scratch LSTM / BiLSTM sequence classifiers with a dense/dropout/softmax
head, trained by SGD with momentum on categorical cross-entropy.

Gradients are hand-derived (no autodiff) and verified against central finite
differences in the test suite. Gate order is (input, forget, cell, output).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .core import EpochSet
from .exceptions import (
    DimensionMismatch,
    KindMismatch,
    NonFiniteLoss,
    ShapeMismatch,
)

P_CLIP = 1e-12


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class NetworkSpec:
    kind: str  # "lstm" | "bilstm"
    input_size: int
    hidden_size: int
    dense_sizes: tuple[int, int] = (64, 32)
    n_classes: int = 4
    dropout: tuple[float, float] = (0.4, 0.4)  # after recurrent readout, after dense1

    def __post_init__(self):
        if self.kind not in ("lstm", "bilstm"):
            raise ValueError(f"unknown front kind {self.kind!r}")
        for p in self.dropout:
            if not (0 <= p < 1):
                raise ValueError("dropout rates must be in [0, 1)")

    @property
    def readout_size(self) -> int:
        return self.hidden_size * (2 if self.kind == "bilstm" else 1)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    max_epochs: int = 150
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


def init_params(spec: NetworkSpec, seed: int = 0) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(h), 1/sqrt(h)) weights, zero biases except forget gate = 1."""
    rng = np.random.default_rng(seed)
    h, d = spec.hidden_size, spec.input_size
    params: dict[str, np.ndarray] = {}

    def cell(prefix: str):
        lim = 1.0 / np.sqrt(h)
        params[f"{prefix}.W"] = rng.uniform(-lim, lim, (4 * h, d))
        params[f"{prefix}.U"] = rng.uniform(-lim, lim, (4 * h, h))
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0  # forget gate
        params[f"{prefix}.b"] = b

    cell("lstm_fwd")
    if spec.kind == "bilstm":
        cell("lstm_bwd")
    sizes = [spec.readout_size, *spec.dense_sizes, spec.n_classes]
    for name, (fan_in, fan_out) in zip(("dense1", "dense2", "out"),
                                       zip(sizes[:-1], sizes[1:])):
        lim = 1.0 / np.sqrt(fan_in)
        params[f"{name}.W"] = rng.uniform(-lim, lim, (fan_out, fan_in))
        params[f"{name}.b"] = np.zeros(fan_out)
    return params


# --------------------------------------------------------------------------
# LSTM cell

def _lstm_forward_batch(W, U, b, X):
    """X: (B, T, d). Returns hidden states (B, T, h) and a cache for backprop."""
    B, T, d = X.shape
    H = U.shape[1]
    h_seq = np.zeros((T + 1, B, H))
    c_seq = np.zeros((T + 1, B, H))
    gates = np.zeros((T, B, 4 * H))
    tanh_c = np.zeros((T, B, H))
    for t in range(T):
        z = X[:, t, :] @ W.T + h_seq[t] @ U.T + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c_seq[t] + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t] = np.concatenate([i, f, g, o], axis=1)
        tanh_c[t] = tc
        c_seq[t + 1] = c
        h_seq[t + 1] = h
    cache = {"X": X, "h": h_seq, "c": c_seq, "gates": gates, "tanh_c": tanh_c}
    return np.transpose(h_seq[1:], (1, 0, 2)), cache


def _lstm_backward_batch(W, U, cache, dh_last):
    """Backprop-through-time given the gradient at the final hidden state only."""
    X, h_seq, c_seq = cache["X"], cache["h"], cache["c"]
    gates, tanh_c = cache["gates"], cache["tanh_c"]
    B, T, d = X.shape
    H = U.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dh = dh_last.copy()
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[t][:, :H]
        f = gates[t][:, H:2 * H]
        g = gates[t][:, 2 * H:3 * H]
        o = gates[t][:, 3 * H:]
        tc = tanh_c[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_seq[t]
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        dW += dz.T @ X[:, t, :]
        dU += dz.T @ h_seq[t]
        db += dz.sum(axis=0)
        dh = dz @ U
        dc = dc * f
    return dW, dU, db


def lstm_forward(W, U, b, sequence):
    """Single-sequence LSTM: (T, d) -> hidden states (T, h) and final (h, c)."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[1] != W.shape[1]:
        raise DimensionMismatch(
            f"sequence shape {seq.shape} incompatible with input size {W.shape[1]}")
    H = U.shape[1]
    if seq.shape[0] == 0:
        return np.zeros((0, H)), (np.zeros(H), np.zeros(H))
    hs, cache = _lstm_forward_batch(W, U, b, seq[None])
    return hs[0], (cache["h"][-1][0], cache["c"][-1][0])


def bilstm_forward(fwd_params, bwd_params, sequence):
    """Concatenation of the forward cell's final hidden state and the backward
    cell's final hidden state over the reversed sequence: (2h,)."""
    seq = np.asarray(sequence, dtype=np.float64)
    _, (hf, _) = lstm_forward(*fwd_params, seq)
    _, (hb, _) = lstm_forward(*bwd_params, seq[::-1])
    return np.concatenate([hf, hb])


# --------------------------------------------------------------------------
# Full network

def forward(spec: NetworkSpec, params: dict, X: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None):
    """Batch forward pass: (B, T, d) -> class probabilities (B, K) and a cache.

    Dropout uses inverted scaling at train time; eval mode is deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != spec.input_size:
        raise DimensionMismatch(f"batch shape {X.shape} does not match spec")
    cache: dict = {"spec": spec, "train": train}
    _, fc = _lstm_forward_batch(params["lstm_fwd.W"], params["lstm_fwd.U"],
                                params["lstm_fwd.b"], X)
    r = fc["h"][-1]
    cache["fwd"] = fc
    if spec.kind == "bilstm":
        Xr = X[:, ::-1, :]
        _, bc = _lstm_forward_batch(params["lstm_bwd.W"], params["lstm_bwd.U"],
                                    params["lstm_bwd.b"], Xr)
        cache["bwd"] = bc
        r = np.concatenate([r, bc["h"][-1]], axis=1)
    p0, p1 = spec.dropout
    if train and p0 > 0:
        if rng is None:
            raise ValueError("train-mode dropout needs an RNG")
        mask0 = (rng.random(r.shape) >= p0) / (1.0 - p0)
    else:
        mask0 = np.ones_like(r)
    rd = r * mask0
    z1 = rd @ params["dense1.W"].T + params["dense1.b"]
    a1 = np.maximum(z1, 0.0)
    if train and p1 > 0:
        if rng is None:
            raise ValueError("train-mode dropout needs an RNG")
        mask1 = (rng.random(a1.shape) >= p1) / (1.0 - p1)
    else:
        mask1 = np.ones_like(a1)
    a1d = a1 * mask1
    z2 = a1d @ params["dense2.W"].T + params["dense2.b"]
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ params["out.W"].T + params["out.b"]
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)
    cache.update(r=r, mask0=mask0, rd=rd, z1=z1, a1=a1, mask1=mask1, a1d=a1d,
                 z2=z2, a2=a2, probs=probs)
    return probs, cache


def loss(probs: np.ndarray, one_hot: np.ndarray) -> float:
    """Mean categorical cross-entropy, probabilities clipped at 1e-12."""
    if probs.shape != one_hot.shape:
        raise ShapeMismatch(f"probs {probs.shape} vs labels {one_hot.shape}")
    p_true = np.clip((probs * one_hot).sum(axis=1), P_CLIP, None)
    return float(-np.log(p_true).mean())


def backward(params: dict, cache: dict, one_hot: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean cross-entropy w.r.t. every parameter."""
    spec: NetworkSpec = cache["spec"]
    B = one_hot.shape[0]
    grads: dict[str, np.ndarray] = {}
    dlogits = (cache["probs"] - one_hot) / B
    grads["out.W"] = dlogits.T @ cache["a2"]
    grads["out.b"] = dlogits.sum(axis=0)
    da2 = dlogits @ params["out.W"]
    dz2 = da2 * (cache["z2"] > 0)
    grads["dense2.W"] = dz2.T @ cache["a1d"]
    grads["dense2.b"] = dz2.sum(axis=0)
    da1d = dz2 @ params["dense2.W"]
    dz1 = da1d * cache["mask1"] * (cache["z1"] > 0)
    grads["dense1.W"] = dz1.T @ cache["rd"]
    grads["dense1.b"] = dz1.sum(axis=0)
    dr = (dz1 @ params["dense1.W"]) * cache["mask0"]
    H = spec.hidden_size
    dW, dU, db = _lstm_backward_batch(params["lstm_fwd.W"], params["lstm_fwd.U"],
                                      cache["fwd"], dr[:, :H])
    grads["lstm_fwd.W"], grads["lstm_fwd.U"], grads["lstm_fwd.b"] = dW, dU, db
    if spec.kind == "bilstm":
        dW, dU, db = _lstm_backward_batch(params["lstm_bwd.W"],
                                          params["lstm_bwd.U"],
                                          cache["bwd"], dr[:, H:])
        grads["lstm_bwd.W"], grads["lstm_bwd.U"], grads["lstm_bwd.b"] = dW, dU, db
    return grads


# --------------------------------------------------------------------------
# Training

@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)  # (epoch, train_loss, val_loss, train_acc, val_acc)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
            for row in self.rows:
                w.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])


def _one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    Y = np.zeros((len(y), n_classes))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def _accuracy(probs: np.ndarray, y: np.ndarray) -> float:
    return float((np.argmax(probs, axis=1) == y).mean())


def _eval_in_batches(spec, params, X, Y, batch: int = 64):
    losses, probs_all = [], []
    for s in range(0, len(X), batch):
        p, _ = forward(spec, params, X[s:s + batch], train=False)
        probs_all.append(p)
        losses.append(loss(p, Y[s:s + batch]) * len(p))
    probs = np.concatenate(probs_all)
    return sum(losses) / len(X), probs


def train(spec: NetworkSpec, params: dict, X_train, y_train, X_val, y_val,
          config: TrainConfig) -> tuple[dict, TrainHistory]:
    """SGD with momentum; returns the parameters of the best validation-loss
    epoch and the per-epoch history. Deterministic for a fixed seed."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    K = spec.n_classes
    Y_train, Y_val = _one_hot(y_train, K), _one_hot(y_val, K)
    rng = np.random.default_rng(config.seed)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    params = {k: v.copy() for k, v in params.items()}
    best = {k: v.copy() for k, v in params.items()}
    best_val = np.inf
    since_best = 0
    history = TrainHistory()
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(X_train))
        for s in range(0, len(order), config.batch_size):
            idx = order[s:s + config.batch_size]
            probs, cache = forward(spec, params, X_train[idx], train=True, rng=rng)
            batch_loss = loss(probs, Y_train[idx])
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}")
            grads = backward(params, cache, Y_train[idx])
            for k in params:
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * grads[k]
                params[k] = params[k] + velocity[k]
        tr_loss, tr_probs = _eval_in_batches(spec, params, X_train, Y_train)
        val_loss, val_probs = _eval_in_batches(spec, params, X_val, Y_val)
        history.rows.append((epoch, tr_loss, val_loss,
                             _accuracy(tr_probs, y_train),
                             _accuracy(val_probs, y_val)))
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best = {k: v.copy() for k, v in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break
    return best, history


# --------------------------------------------------------------------------
# Input shaping

def shape_input(kind: str, data) -> np.ndarray:
    """Turn pipeline inputs into (batch, timesteps, features) tensors.

    raw_all / raw_selected: EpochSet -> (n_epochs, n_timesteps, n_channels).
    psd_features: FeatureMatrix -> (n_epochs, n_features, 1), treating the
    feature vector as a length-n sequence of scalars.
    """
    from .features import FeatureMatrix
    if kind in ("raw_all", "raw_selected"):
        if not isinstance(data, EpochSet):
            raise KindMismatch(f"{kind} input must be an EpochSet")
        return np.transpose(data.tensor(), (0, 2, 1)).astype(np.float64)
    if kind == "psd_features":
        if not isinstance(data, FeatureMatrix):
            raise KindMismatch("psd_features input must be a FeatureMatrix")
        return data.values[:, :, None].astype(np.float64)
    raise KindMismatch(f"unknown input kind {kind!r}")


# --------------------------------------------------------------------------
# Estimator facade

class LstmClassifier(ClassifierMixin, BaseEstimator):
    """Sequence classifier over (batch, timesteps, features) tensors.

    Inputs are per-feature z-scored with training-set statistics; a stratified
    slice of the training data is held out for early stopping.
    """

    kind = "lstm"

    def __init__(self, hidden_size: int = 64, dense_sizes: tuple = (64, 32),
                 dropout: tuple = (0.4, 0.4), learning_rate: float = 0.01,
                 momentum: float = 0.9, batch_size: int = 16,
                 max_epochs: int = 150, patience: int = 20,
                 validation_fraction: float = 0.15, seed: int = 0):
        self.hidden_size = hidden_size
        self.dense_sizes = dense_sizes
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.classes_ = np.unique(y)
        y_idx = np.searchsorted(self.classes_, y)
        self.mean_ = X.mean(axis=(0, 1))
        self.std_ = X.std(axis=(0, 1))
        self.std_[self.std_ == 0] = 1.0
        Xn = (X - self.mean_) / self.std_
        self.spec_ = NetworkSpec(kind=self.kind, input_size=X.shape[2],
                                 hidden_size=self.hidden_size,
                                 dense_sizes=tuple(self.dense_sizes),
                                 n_classes=len(self.classes_),
                                 dropout=tuple(self.dropout))
        tr_idx, val_idx = _stratified_holdout(y_idx, self.validation_fraction,
                                              self.seed)
        params = init_params(self.spec_, seed=self.seed)
        config = TrainConfig(learning_rate=self.learning_rate,
                             momentum=self.momentum, batch_size=self.batch_size,
                             max_epochs=self.max_epochs, patience=self.patience,
                             seed=self.seed)
        self.params_, self.history_ = train(
            self.spec_, params, Xn[tr_idx], y_idx[tr_idx], Xn[val_idx],
            y_idx[val_idx], config)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        Xn = (X - self.mean_) / self.std_
        _, probs = _eval_in_batches(self.spec_, self.params_, Xn,
                                    np.zeros((len(X), self.spec_.n_classes)))
        return probs

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    # -- serialization: JSON spec + float32 blob, same tensor convention as
    #    the canonical epoch files

    def save(self, path: str) -> None:
        order = sorted(self.params_)
        header = {
            "format_version": 1,
            "kind": self.kind,
            "spec": {
                "input_size": self.spec_.input_size,
                "hidden_size": self.spec_.hidden_size,
                "dense_sizes": list(self.spec_.dense_sizes),
                "n_classes": self.spec_.n_classes,
                "dropout": list(self.spec_.dropout),
            },
            "classes": self.classes_.tolist(),
            "mean": self.mean_.tolist(),
            "std": self.std_.tolist(),
            "tensors": [{"name": k, "shape": list(self.params_[k].shape)}
                        for k in order],
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(header, fh, sort_keys=True, separators=(",", ":"))
        blob = np.concatenate([self.params_[k].ravel() for k in order])
        with open(path + ".f32", "wb") as fh:
            fh.write(blob.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str) -> "LstmClassifier":
        with open(path + ".json", "r", encoding="utf-8") as fh:
            header = json.load(fh)
        model = BilstmClassifier() if header["kind"] == "bilstm" else LstmClassifier()
        s = header["spec"]
        model.spec_ = NetworkSpec(kind=header["kind"], input_size=s["input_size"],
                                  hidden_size=s["hidden_size"],
                                  dense_sizes=tuple(s["dense_sizes"]),
                                  n_classes=s["n_classes"],
                                  dropout=tuple(s["dropout"]))
        model.classes_ = np.array(header["classes"])
        model.mean_ = np.array(header["mean"])
        model.std_ = np.array(header["std"])
        blob = np.frombuffer(open(path + ".f32", "rb").read(), dtype="<f4")
        params = {}
        offset = 0
        for t in header["tensors"]:
            size = int(np.prod(t["shape"]))
            params[t["name"]] = blob[offset:offset + size].astype(
                np.float64).reshape(t["shape"])
            offset += size
        model.params_ = params
        return model


class BilstmClassifier(LstmClassifier):
    kind = "bilstm"


def _stratified_holdout(y: np.ndarray, fraction: float, seed: int):
    """Deterministic stratified train/validation index split."""
    rng = np.random.default_rng(seed)
    tr, val = [], []
    for c in np.unique(y):
        idx = np.nonzero(y == c)[0]
        idx = idx[rng.permutation(len(idx))]
        n_val = max(1, int(round(fraction * len(idx))))
        val.extend(idx[:n_val])
        tr.extend(idx[n_val:])
    return np.sort(np.array(tr)), np.sort(np.array(val))
