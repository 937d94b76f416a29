"""Domain data model: recordings, epochs, epoch sets and the canonical on-disk format.

The canonical format is a pair of files sharing a base name: ``<name>.json``
(header) and ``<name>.f32`` (little-endian float32 tensor, epoch-major then
channel-major then time).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import (
    EmptySelection,
    IntervalTooShort,
    MalformedHeader,
    NonFiniteSample,
    ShapeMismatch,
)

FORMAT_VERSION = 1

LEFT = "left"
RIGHT = "right"
MIDLINE = "midline"
UNKNOWN = "unknown"
HEMISPHERES = (LEFT, RIGHT, MIDLINE, UNKNOWN)


def hemisphere_of(name: str) -> str:
    """Infer hemisphere from a 10-20 style label: odd digit = left, even = right, z = midline."""
    tail = name.strip()
    if not tail:
        return UNKNOWN
    if tail[-1] in ("z", "Z"):
        return MIDLINE
    if tail[-1].isdigit():
        return LEFT if int(tail[-1]) % 2 == 1 else RIGHT
    return UNKNOWN


@dataclass(frozen=True)
class ChannelInfo:
    name: str
    hemisphere: str = UNKNOWN
    index: int = 0

    def __post_init__(self):
        if self.hemisphere not in HEMISPHERES:
            raise ValueError(f"unknown hemisphere {self.hemisphere!r}")


def make_channels(names: Sequence[str], hemispheres: dict[str, str] | None = None) -> list[ChannelInfo]:
    """Build a channel list, deriving hemispheres from labels unless overridden."""
    out = []
    for i, name in enumerate(names):
        hemi = (hemispheres or {}).get(name, hemisphere_of(name))
        out.append(ChannelInfo(name=name, hemisphere=hemi, index=i))
    if len({c.name for c in out}) != len(out):
        raise ValueError("channel names must be unique")
    return out


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float32)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Recording:
    channels: list[ChannelInfo]
    sampling_rate_hz: float
    samples: np.ndarray  # n_channels x n_samples, microvolts
    subject_id: str = ""
    session_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", _freeze(self.samples))
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        if self.samples.ndim != 2 or self.samples.shape[0] != len(self.channels):
            raise ValueError("samples must be n_channels x n_samples")
        if not np.isfinite(self.samples).all():
            raise NonFiniteSample("recording contains NaN/Inf samples")


REST = "rest"
ACTION = "action"
WINDOW = "window"


@dataclass(frozen=True)
class Interval:
    kind: str  # rest | action | window
    start_s: float | None = None
    end_s: float | None = None

    @staticmethod
    def rest() -> "Interval":
        return Interval(REST)

    @staticmethod
    def action() -> "Interval":
        return Interval(ACTION)

    @staticmethod
    def window(start_s: float, end_s: float) -> "Interval":
        return Interval(WINDOW, start_s, end_s)


@dataclass(frozen=True)
class Epoch:
    data: np.ndarray  # n_channels x n_timesteps, microvolts
    label: int
    interval: Interval = field(default_factory=Interval.action)
    subject_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        if self.data.ndim != 2:
            raise ValueError("epoch data must be 2-D (channels x time)")
        if not np.isfinite(self.data).all():
            raise NonFiniteSample("epoch contains NaN/Inf samples")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EpochSet:
    epochs: tuple[Epoch, ...]
    sampling_rate_hz: float
    class_names: tuple[str, ...]
    channels: list[ChannelInfo]
    subject_id: str = ""
    condition: str = ""

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(self.epochs))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        n_ch = len(self.channels)
        for ep in self.epochs:
            if ep.n_channels != n_ch:
                raise ShapeMismatch(
                    f"epoch has {ep.n_channels} channels, set declares {n_ch}")
            if not (0 <= ep.label < len(self.class_names)):
                raise ValueError(f"label {ep.label} outside class table")
    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def n_timesteps(self) -> int:
        """Common timestep count; raises if epochs are ragged (legal for binary sets)."""
        if not self.epochs:
            return 0
        lengths = {ep.n_timesteps for ep in self.epochs}
        if len(lengths) > 1:
            raise ShapeMismatch(f"epochs have mixed lengths {sorted(lengths)}")
        return lengths.pop()

    @property
    def labels(self) -> np.ndarray:
        return np.array([ep.label for ep in self.epochs], dtype=np.int64)

    def tensor(self) -> np.ndarray:
        """Stack epochs to (n_epochs, n_channels, n_timesteps) float32."""
        if not self.epochs:
            return np.zeros((0, len(self.channels), 0), dtype=np.float32)
        return np.stack([ep.data for ep in self.epochs])


def save_epochset(epoch_set: EpochSet, path: str | os.PathLike) -> None:
    """Write ``<path>.json`` + ``<path>.f32``; identical inputs yield identical bytes."""
    base = _strip_ext(str(path))
    header = {
        "format_version": FORMAT_VERSION,
        "n_epochs": len(epoch_set),
        "n_channels": len(epoch_set.channels),
        "n_timesteps": epoch_set.n_timesteps,
        "sampling_rate_hz": epoch_set.sampling_rate_hz,
        "class_names": list(epoch_set.class_names),
        "labels": [int(x) for x in epoch_set.labels],
        "channels": [
            {"name": c.name, "hemisphere": c.hemisphere, "index": c.index}
            for c in epoch_set.channels
        ],
        "subject_id": epoch_set.subject_id,
        "condition": epoch_set.condition,
    }
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, sort_keys=True, separators=(",", ":"))
    tensor = epoch_set.tensor().astype("<f4")
    with open(base + ".f32", "wb") as fh:
        fh.write(tensor.tobytes())


_HEADER_FIELDS = {
    "format_version", "n_epochs", "n_channels", "n_timesteps",
    "sampling_rate_hz", "class_names", "labels", "channels",
    "subject_id", "condition",
}


def load_epochset(path: str | os.PathLike) -> EpochSet:
    """Load a canonical EpochSet; inverse of :func:`save_epochset`."""
    base = _strip_ext(str(path))
    try:
        with open(base + ".json", "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedHeader(f"cannot read header {base}.json: {exc}") from exc
    missing = _HEADER_FIELDS - set(header)
    if missing:
        raise MalformedHeader(f"header missing fields: {sorted(missing)}")
    n_e, n_c, n_t = header["n_epochs"], header["n_channels"], header["n_timesteps"]
    if len(header["labels"]) != n_e:
        raise MalformedHeader("labels length does not match n_epochs")
    raw = open(base + ".f32", "rb").read()
    expected = n_e * n_c * n_t * 4
    if len(raw) != expected:
        raise ShapeMismatch(
            f"tensor file is {len(raw)} bytes, expected {expected}")
    tensor = np.frombuffer(raw, dtype="<f4").reshape(n_e, n_c, n_t)
    if not np.isfinite(tensor).all():
        raise NonFiniteSample("tensor contains NaN/Inf")
    channels = [
        ChannelInfo(name=c["name"], hemisphere=c["hemisphere"], index=c["index"])
        for c in header["channels"]
    ]
    epochs = [
        Epoch(data=tensor[i], label=int(header["labels"][i]),
              subject_id=header["subject_id"])
        for i in range(n_e)
    ]
    return EpochSet(
        epochs=tuple(epochs),
        sampling_rate_hz=float(header["sampling_rate_hz"]),
        class_names=tuple(header["class_names"]),
        channels=channels,
        subject_id=header["subject_id"],
        condition=header["condition"],
    )


def _strip_ext(path: str) -> str:
    for ext in (".json", ".f32"):
        if path.endswith(ext):
            return path[: -len(ext)]
    return path


ChannelPredicate = Callable[[ChannelInfo], bool]


def select_channels(epoch_set: EpochSet, predicate: ChannelPredicate | Iterable[str]) -> EpochSet:
    """Restrict each epoch to the channels the predicate keeps, re-indexing ChannelInfo.

    ``predicate`` is either a callable on ChannelInfo or an iterable of names.
    """
    if not callable(predicate):
        wanted = set(predicate)
        predicate = lambda c: c.name in wanted  # noqa: E731
    keep = [c for c in epoch_set.channels if predicate(c)]
    if not keep:
        raise EmptySelection("channel predicate matched no channels")
    rows = [c.index for c in keep]
    new_channels = [replace(c, index=i) for i, c in enumerate(keep)]
    new_epochs = tuple(
        Epoch(data=ep.data[rows], label=ep.label, interval=ep.interval,
              subject_id=ep.subject_id)
        for ep in epoch_set.epochs
    )
    return EpochSet(
        epochs=new_epochs,
        sampling_rate_hz=epoch_set.sampling_rate_hz,
        class_names=epoch_set.class_names,
        channels=new_channels,
        subject_id=epoch_set.subject_id,
        condition=epoch_set.condition,
    )


def left_hemisphere(c: ChannelInfo) -> bool:
    return c.hemisphere == LEFT


@dataclass(frozen=True)
class Trial:
    """One full trial with rest/action interval annotations, in seconds from trial start."""
    data: np.ndarray  # n_channels x n_samples
    label: int
    rest_span_s: tuple[float, float]
    action_span_s: tuple[float, float]
    subject_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))


def split_rest_action(
    trials: Sequence[Trial],
    sampling_rate_hz: float,
    channels: list[ChannelInfo],
    rest_s: float = 1.5,
    action_s: float = 2.5,
    subject_id: str = "",
) -> EpochSet:
    """Emit two binary-labeled epochs per trial: the first ``rest_s`` of the rest
    interval (label 0) and the first ``action_s`` of the action interval (label 1)."""
    fs = sampling_rate_hz
    n_rest = int(round(rest_s * fs))
    n_action = int(round(action_s * fs))
    epochs: list[Epoch] = []
    for t in trials:
        for (start, end), need, dur, label, kind in (
            (t.rest_span_s, n_rest, rest_s, 0, Interval.rest()),
            (t.action_span_s, n_action, action_s, 1, Interval.action()),
        ):
            if end - start + 1e-9 < dur:
                raise IntervalTooShort(
                    f"requested {dur}s from a {end - start:.3f}s interval")
            i0 = int(round(start * fs))
            if i0 + need > t.data.shape[1]:
                raise IntervalTooShort("interval extends past end of trial data")
            epochs.append(Epoch(data=t.data[:, i0:i0 + need], label=label,
                                interval=kind, subject_id=t.subject_id))
    # rest epochs first per trial keeps (rest, action) pairs adjacent
    return EpochSet(
        epochs=tuple(epochs),
        sampling_rate_hz=fs,
        class_names=("rest", "action"),
        channels=channels,
        subject_id=subject_id,
        condition="binary_rest_action",
    )
