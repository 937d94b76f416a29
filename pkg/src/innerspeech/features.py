"""Feature assembly and the three dimensionality-reduction strategies:
PCA, tree-gain selection (per subject and cross-subject intersection), and
channel subsetting."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .core import EpochSet
from .dsp import BandDef, relative_band_power, welch_psd
from .exceptions import (
    AllZeroGains,
    DegenerateData,
    DimensionMismatch,
    PcaProvenance,
)

# provenance entry: ("C3", "alpha") for a raw band-power column,
# "component-3" after PCA
Provenance = "tuple[str, str] | str"


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # n_epochs x n_features
    provenance: tuple
    labels: np.ndarray  # n_epochs

    def __post_init__(self):
        if not np.isfinite(self.values).all():
            raise ValueError("feature matrix contains NaN/Inf")
        if len(self.provenance) != self.values.shape[1]:
            raise ValueError("provenance length must equal n_features")
        if len(self.labels) != self.values.shape[0]:
            raise ValueError("labels length must equal n_epochs")

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def build_feature_matrix(epoch_set: EpochSet, bands: Sequence[BandDef],
                         seg_len: int | None = None, overlap_frac: float = 0.5,
                         taper: str = "hann",
                         denominator: str = "union") -> FeatureMatrix:
    """Relative band power per (channel, band), channel-major column order."""
    if len(epoch_set) == 0:
        raise ValueError("cannot featurize an empty EpochSet")
    fs = epoch_set.sampling_rate_hz
    provenance = tuple((c.name, b.name) for c in epoch_set.channels for b in bands)
    rows = []
    for ep in epoch_set.epochs:
        row = []
        for ch in range(ep.n_channels):
            psd = welch_psd(np.asarray(ep.data[ch], dtype=np.float64), fs,
                            seg_len=seg_len, overlap_frac=overlap_frac, taper=taper)
            row.append(relative_band_power(psd, bands, denominator=denominator))
        rows.append(np.concatenate(row))
    return FeatureMatrix(values=np.array(rows), provenance=provenance,
                         labels=epoch_set.labels)


class BandPowerExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`build_feature_matrix` so band-power
    extraction composes with sklearn-style pipelines."""

    def __init__(self, bands=None, seg_len=None, overlap_frac=0.5, taper="hann",
                 denominator="union"):
        self.bands = bands
        self.seg_len = seg_len
        self.overlap_frac = overlap_frac
        self.taper = taper
        self.denominator = denominator

    def fit(self, X, y=None):
        return self

    def transform(self, X: EpochSet) -> np.ndarray:
        from .dsp import DEFAULT_BANDS
        fm = build_feature_matrix(X, self.bands or DEFAULT_BANDS,
                                  seg_len=self.seg_len,
                                  overlap_frac=self.overlap_frac,
                                  taper=self.taper, denominator=self.denominator)
        return fm.values


# --------------------------------------------------------------------------
# PCA

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x n_features, orthonormal rows
    explained_variance_ratio: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        })

    @staticmethod
    def from_json(text: str) -> "PcaModel":
        d = json.loads(text)
        return PcaModel(mean=np.array(d["mean"]),
                        components=np.array(d["components"]),
                        explained_variance_ratio=np.array(d["explained_variance_ratio"]),
                        explained_variance=np.array(d["explained_variance"]))


def pca_fit(X: np.ndarray, variance_target: float = 0.99) -> PcaModel:
    """Thin-SVD PCA keeping the smallest k with cumulative explained variance
    >= ``variance_target``."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise DegenerateData("PCA needs at least 2 rows")
    if not (0 < variance_target <= 1):
        raise ValueError("variance_target must be in (0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean
    u, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2 / (X.shape[0] - 1)
    total = var.sum()
    if total <= 0:
        raise DegenerateData("data has zero total variance")
    ratio = var / total
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    k = min(k, len(s))
    return PcaModel(mean=mean, components=vt[:k],
                    explained_variance_ratio=ratio[:k],
                    explained_variance=var[:k])


def pca_transform(model: PcaModel, fm: FeatureMatrix) -> FeatureMatrix:
    X = np.asarray(fm.values, dtype=np.float64)
    if X.shape[1] != model.components.shape[1]:
        raise DimensionMismatch(
            f"matrix has {X.shape[1]} features, model expects "
            f"{model.components.shape[1]}")
    scores = (X - model.mean) @ model.components.T
    provenance = tuple(f"component-{k}" for k in range(model.n_components))
    return FeatureMatrix(values=scores, provenance=provenance, labels=fm.labels)


class PcaReducer(TransformerMixin, BaseEstimator):
    """Estimator facade over :func:`pca_fit` / :func:`pca_transform` on raw arrays."""

    def __init__(self, variance_target: float = 0.99):
        self.variance_target = variance_target

    def fit(self, X, y=None):
        self.model_ = pca_fit(np.asarray(X), self.variance_target)
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.model_.components.shape[1]:
            raise DimensionMismatch("feature count differs from fit")
        return (X - self.model_.mean) @ self.model_.components.T


# --------------------------------------------------------------------------
# Gain-based selection

@dataclass(frozen=True)
class ImportanceReport:
    gains: np.ndarray  # normalized, sums to 1
    selected: tuple[int, ...]
    threshold: float

    def to_json(self) -> str:
        return json.dumps({
            "gains": self.gains.tolist(),
            "selected": list(self.selected),
            "threshold": self.threshold,
        })


def select_by_gain(gains: np.ndarray, cumulative_threshold: float = 0.95) -> tuple[int, ...]:
    """Smallest prefix of importance-sorted features whose normalized cumulative
    gain reaches the threshold; ties broken by lower index. Ascending result."""
    gains = np.asarray(gains, dtype=np.float64)
    if (gains < 0).any():
        raise ValueError("gains must be non-negative")
    total = gains.sum()
    if total <= 0:
        raise AllZeroGains("all gains are zero")
    order = np.lexsort((np.arange(len(gains)), -gains))
    cum = np.cumsum(gains[order]) / total
    k = int(np.searchsorted(cum, cumulative_threshold - 1e-12) + 1)
    k = min(k, len(gains))
    # zero-gain features never help reach the threshold; drop any trailing ones
    chosen = [int(i) for i in order[:k] if gains[i] > 0]
    return tuple(sorted(chosen))


def intersect_selected(per_subject: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Features common to all subjects, ascending. Empty intersection is legal."""
    if not per_subject:
        raise ValueError("need at least one subject")
    common = set(per_subject[0])
    for s in per_subject[1:]:
        common &= set(s)
    if not common and len(per_subject) > 1:
        warnings.warn("cross-subject feature intersection is empty")
    return tuple(sorted(common))


def columns_to_channels(selected: Sequence[int], provenance: Sequence) -> set[str]:
    """Channel names owning at least one selected column."""
    names = set()
    for i in selected:
        p = provenance[i]
        if isinstance(p, str):
            raise PcaProvenance(f"column {i} is a PCA component, not a channel/band")
        names.add(p[0])
    return names


def export_selected_csv(path: str, selected: Sequence[int], provenance: Sequence,
                        gains: np.ndarray) -> None:
    """CSV of (column_index, channel, band, gain) for the selected features."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["column_index", "channel", "band", "gain"])
        for i in selected:
            ch, band = provenance[i]
            w.writerow([i, ch, band, f"{gains[i]:.6f}"])
