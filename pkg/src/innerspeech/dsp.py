"""Digital preprocessing (filters, resampling, windowing) and spectral features
(Welch PSD, relative band power)."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .core import Epoch, EpochSet, Interval
from .exceptions import (
    BandOutOfRange,
    InvalidBandEdges,
    InvalidFrequency,
    SegmentTooLong,
    SignalTooShort,
    UpsamplingUnsupported,
    WindowTooLong,
    ZeroTotalPower,
)


@dataclass(frozen=True)
class BandDef:
    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not (0 < self.low_hz < self.high_hz):
            raise InvalidBandEdges(f"bad band {self.name}: [{self.low_hz}, {self.high_hz}]")


ALPHA = BandDef("alpha", 8.0, 13.0)
BETA = BandDef("beta", 13.0, 30.0)
GAMMA = BandDef("gamma", 30.0, 100.0)
# the Imagined Speech recordings are band-limited to 40 Hz at the source,
# so gamma is truncated there for that profile
GAMMA_NARROW = BandDef("gamma", 30.0, 40.0)
DEFAULT_BANDS = (ALPHA, BETA, GAMMA)


@dataclass(frozen=True)
class PsdEstimate:
    freqs_hz: np.ndarray
    power: np.ndarray  # one-sided density, µV²/Hz
    seg_len: int
    overlap_frac: float


@dataclass(frozen=True)
class PreprocessProfile:
    bandpass: tuple[float, float] | None = None
    notch_hz: float | None = None
    target_rate_hz: float | None = None
    filter_order: int = 4

    def to_json(self) -> str:
        return json.dumps({
            "bandpass": list(self.bandpass) if self.bandpass else None,
            "notch_hz": self.notch_hz,
            "target_rate_hz": self.target_rate_hz,
            "filter_order": self.filter_order,
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PreprocessProfile":
        d = json.loads(text)
        return PreprocessProfile(
            bandpass=tuple(d["bandpass"]) if d.get("bandpass") else None,
            notch_hz=d.get("notch_hz"),
            target_rate_hz=d.get("target_rate_hz"),
            filter_order=d.get("filter_order", 4),
        )


PROFILES = {
    "thinking-out-loud": PreprocessProfile(bandpass=(0.5, 100.0), notch_hz=50.0,
                                           target_rate_hz=254.0, filter_order=4),
    "imagined-speech": PreprocessProfile(bandpass=(2.0, 40.0), notch_hz=None,
                                         target_rate_hz=None, filter_order=4),
}


def bandpass_filter(x: np.ndarray, fs: float, low: float, high: float,
                    order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth bandpass (forward-backward), same length as input."""
    x = np.asarray(x, dtype=np.float64)
    if not (0 < low < high < fs / 2):
        raise InvalidBandEdges(f"band edges ({low}, {high}) invalid for fs={fs}")
    if x.shape[-1] <= 3 * order:
        raise SignalTooShort(f"need > {3 * order} samples, got {x.shape[-1]}")
    sos = sps.butter(order, [low, high], btype="bandpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, x, axis=-1)


def notch_filter(x: np.ndarray, fs: float, f0: float = 50.0,
                 quality: float = 30.0) -> np.ndarray:
    """Zero-phase IIR notch removing a narrow line at ``f0``."""
    x = np.asarray(x, dtype=np.float64)
    if not (0 < f0 < fs / 2):
        raise InvalidFrequency(f"notch frequency {f0} invalid for fs={fs}")
    b, a = sps.iirnotch(f0, quality, fs=fs)
    return sps.filtfilt(b, a, x, axis=-1)


def resample(x: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Downsample with anti-alias low-pass then linear interpolation.

    1024 -> 254 Hz is a non-integer ratio, so plain decimation is impossible.
    """
    x = np.asarray(x, dtype=np.float64)
    if fs_out > fs_in:
        raise UpsamplingUnsupported(f"fs_out={fs_out} > fs_in={fs_in}")
    if fs_out == fs_in:
        return x.copy()
    cutoff = 0.45 * fs_out
    sos = sps.butter(8, cutoff, btype="low", fs=fs_in, output="sos")
    lp = sps.sosfiltfilt(sos, x, axis=-1)
    n_in = x.shape[-1]
    n_out = int(round(n_in * fs_out / fs_in))
    t_in = np.arange(n_in) / fs_in
    t_out = np.arange(n_out) / fs_out
    if lp.ndim == 1:
        return np.interp(t_out, t_in, lp)
    return np.stack([np.interp(t_out, t_in, row) for row in lp])


def sliding_windows(epoch: Epoch, sampling_rate_hz: float, width_s: float = 0.5,
                    overlap_frac: float = 0.5) -> list[Epoch]:
    """Cut an epoch into fixed-width windows; trailing partial window is discarded."""
    fs = sampling_rate_hz
    n_t = epoch.n_timesteps
    width = int(round(width_s * fs))
    if width > n_t:
        raise WindowTooLong(f"window of {width} samples exceeds epoch of {n_t}")
    hop = max(1, int(width * (1.0 - overlap_frac)))
    starts = range(0, n_t - width + 1, hop)
    return [
        Epoch(data=epoch.data[:, s:s + width], label=epoch.label,
              interval=Interval.window(s / fs, (s + width) / fs),
              subject_id=epoch.subject_id)
        for s in starts
    ]


def _taper(name: str, n: int) -> np.ndarray:
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if name in ("rect", "boxcar", "rectangular"):
        return np.ones(n)
    raise ValueError(f"unknown taper {name!r}")


def welch_psd(x: np.ndarray, fs: float, seg_len: int | None = None,
              overlap_frac: float = 0.5, taper: str = "hann") -> PsdEstimate:
    """One-sided Welch PSD: mean of tapered periodograms over overlapping segments.

    Density-normalized so the integral over [0, fs/2] approximates the signal
    variance (white-noise Parseval).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if seg_len is None:
        seg_len = min(n, int(round(fs)))
    if seg_len > n:
        raise SegmentTooLong(f"seg_len {seg_len} > signal length {n}")
    if not (0 <= overlap_frac < 1):
        raise ValueError("overlap_frac must be in [0, 1)")
    win = _taper(taper, seg_len)
    hop = max(1, seg_len - int(seg_len * overlap_frac))
    scale = 1.0 / (fs * np.sum(win ** 2))
    freqs = np.fft.rfftfreq(seg_len, d=1.0 / fs)
    acc = np.zeros(len(freqs))
    n_segs = 0
    for start in range(0, n - seg_len + 1, hop):
        seg = x[start:start + seg_len] * win
        spec = np.abs(np.fft.rfft(seg)) ** 2
        acc += spec
        n_segs += 1
    power = acc * (scale / n_segs)
    # one-sided: double everything except DC (and Nyquist when seg_len is even)
    power[1:] *= 2.0
    if seg_len % 2 == 0:
        power[-1] /= 2.0
    return PsdEstimate(freqs_hz=freqs, power=power, seg_len=seg_len,
                       overlap_frac=overlap_frac)


def _integral(freqs: np.ndarray, power: np.ndarray, lo: float, hi: float) -> float:
    """Trapezoidal integral of the PSD over [lo, hi], interpolating at the edges."""
    lo = max(lo, float(freqs[0]))
    hi = min(hi, float(freqs[-1]))
    if hi <= lo:
        return 0.0
    inner = freqs[(freqs > lo) & (freqs < hi)]
    pts = np.concatenate(([lo], inner, [hi]))
    vals = np.interp(pts, freqs, power)
    return float(np.trapezoid(vals, pts))


def _merge_spans(spans: list[tuple[float, float]]) -> list[tuple[float, float]]:
    spans = sorted(spans)
    merged = [spans[0]]
    for lo, hi in spans[1:]:
        if lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def relative_band_power(psd: PsdEstimate, bands: Sequence[BandDef],
                        denominator: str = "union") -> np.ndarray:
    """Band-integrated power divided by the integral over the union of the
    requested bands (``denominator="union"``) or over the whole spectrum
    (``denominator="total"``)."""
    freqs, power = psd.freqs_hz, psd.power
    nyq = float(freqs[-1])
    for b in bands:
        if b.high_hz > nyq + 1e-9 or b.low_hz < 0:
            raise BandOutOfRange(f"band {b.name} [{b.low_hz}, {b.high_hz}] "
                                 f"outside [0, {nyq}]")
    if denominator == "union":
        spans = _merge_spans([(b.low_hz, b.high_hz) for b in bands])
        total = sum(_integral(freqs, power, lo, hi) for lo, hi in spans)
    elif denominator == "total":
        total = _integral(freqs, power, 0.0, nyq)
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    if total <= 0:
        raise ZeroTotalPower("total power over requested range is zero")
    return np.array([_integral(freqs, power, b.low_hz, b.high_hz) / total
                     for b in bands])


def preprocess_epochset(epoch_set: EpochSet, profile: PreprocessProfile) -> EpochSet:
    """Apply a preprocessing profile (bandpass, notch, resample) per epoch per channel."""
    fs = epoch_set.sampling_rate_hz
    out_fs = profile.target_rate_hz or fs
    new_epochs = []
    for ep in epoch_set.epochs:
        data = np.asarray(ep.data, dtype=np.float64)
        if profile.bandpass is not None:
            data = bandpass_filter(data, fs, *profile.bandpass,
                                   order=profile.filter_order)
        if profile.notch_hz is not None:
            data = notch_filter(data, fs, profile.notch_hz)
        if out_fs != fs:
            data = resample(data, fs, out_fs)
        new_epochs.append(Epoch(data=data, label=ep.label, interval=ep.interval,
                                subject_id=ep.subject_id))
    return EpochSet(epochs=tuple(new_epochs), sampling_rate_hz=out_fs,
                    class_names=epoch_set.class_names, channels=epoch_set.channels,
                    subject_id=epoch_set.subject_id, condition=epoch_set.condition)
