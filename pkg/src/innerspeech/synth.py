"""Synthetic EEG generator with known class structure, used as the desk-scale
oracle in place of the non-redistributable recordings.

Each epoch is a pink+white noise mix plus its class's sinusoidal injections
with a random phase per trial, so classifiers must discriminate spectrally
rather than by waveform alignment.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import ChannelInfo, Epoch, EpochSet, Interval, make_channels
from .exceptions import NyquistViolation


@dataclass(frozen=True)
class Injection:
    channel: int
    freq_hz: float
    amplitude: float


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int
    n_trials_per_class: int
    n_channels: int
    sampling_rate_hz: float
    duration_s: float
    class_signatures: tuple  # per class: tuple of Injection
    noise_sigma: float = 1.0
    seed: int = 0
    class_names: tuple = ()
    channel_names: tuple = ()

    def to_json(self) -> str:
        return json.dumps({
            "n_classes": self.n_classes,
            "n_trials_per_class": self.n_trials_per_class,
            "n_channels": self.n_channels,
            "sampling_rate_hz": self.sampling_rate_hz,
            "duration_s": self.duration_s,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "class_names": list(self.class_names),
            "channel_names": list(self.channel_names),
            "class_signatures": [
                [{"channel": inj.channel, "freq_hz": inj.freq_hz,
                  "amplitude": inj.amplitude} for inj in sig]
                for sig in self.class_signatures
            ],
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SynthSpec":
        d = json.loads(text)
        sigs = tuple(
            tuple(Injection(inj["channel"], inj["freq_hz"], inj["amplitude"])
                  for inj in sig)
            for sig in d["class_signatures"])
        return SynthSpec(
            n_classes=d["n_classes"], n_trials_per_class=d["n_trials_per_class"],
            n_channels=d["n_channels"], sampling_rate_hz=d["sampling_rate_hz"],
            duration_s=d["duration_s"], class_signatures=sigs,
            noise_sigma=d["noise_sigma"], seed=d["seed"],
            class_names=tuple(d["class_names"]),
            channel_names=tuple(d["channel_names"]))


def _pink_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-variance 1/f-shaped noise via spectral shaping of white noise."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    shaping = np.ones_like(freqs)
    shaping[1:] = 1.0 / np.sqrt(freqs[1:])
    shaping[0] = 0.0
    pink = np.fft.irfft(spec * shaping, n)
    sd = pink.std()
    return pink / sd if sd > 0 else pink


def _trial_noise(rng: np.random.Generator, n_channels: int, n: int,
                 sigma: float) -> np.ndarray:
    if sigma == 0:
        return np.zeros((n_channels, n))
    out = np.empty((n_channels, n))
    for ch in range(n_channels):
        white = rng.standard_normal(n)
        pink = _pink_noise(rng, n)
        out[ch] = sigma * (white + pink) / np.sqrt(2.0)  # 50/50 power mix
    return out


def generate(spec: SynthSpec) -> EpochSet:
    """Deterministic per seed; per-trial RNG streams derive from (seed, class, trial)."""
    fs = spec.sampling_rate_hz
    nyq = fs / 2
    for sig in spec.class_signatures:
        for inj in sig:
            if inj.freq_hz >= nyq:
                raise NyquistViolation(
                    f"injection at {inj.freq_hz} Hz >= Nyquist {nyq} Hz")
            if inj.amplitude < 0:
                raise ValueError("amplitudes must be >= 0")
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs
    epochs = []
    for c in range(spec.n_classes):
        for j in range(spec.n_trials_per_class):
            rng = np.random.default_rng([spec.seed, c, j])
            data = _trial_noise(rng, spec.n_channels, n, spec.noise_sigma)
            for inj in spec.class_signatures[c]:
                phase = rng.uniform(0, 2 * np.pi)
                data[inj.channel] += inj.amplitude * np.sin(
                    2 * np.pi * inj.freq_hz * t + phase)
            epochs.append(Epoch(data=data, label=c, interval=Interval.action(),
                                subject_id="synthetic"))
    class_names = spec.class_names or tuple(f"class{c}" for c in range(spec.n_classes))
    if spec.channel_names:
        channels = make_channels(spec.channel_names)
    else:
        channels = [ChannelInfo(name=f"ch{i}", index=i)
                    for i in range(spec.n_channels)]
    return EpochSet(epochs=tuple(epochs), sampling_rate_hz=fs,
                    class_names=class_names, channels=channels,
                    subject_id="synthetic", condition="synthetic")


# band-center injection frequencies for the default four classes
_DEFAULT_SIGNATURES = (
    # class 0 "up": alpha on F3/C3
    ((0, 10.5), (2, 10.5)),
    # class 1 "down": beta on F4/C4
    ((1, 21.0), (3, 21.0)),
    # class 2 "right": low gamma on P3/P4
    ((4, 35.0), (5, 35.0)),
    # class 3 "left": alpha + beta on O1/O2
    ((6, 10.5), (7, 21.0)),
)


def default_4class_spec(snr: float, seed: int = 0) -> SynthSpec:
    if snr < 0:
        raise ValueError("snr must be >= 0")
    sigs = tuple(
        tuple(Injection(channel=ch, freq_hz=f, amplitude=snr) for ch, f in sig)
        for sig in _DEFAULT_SIGNATURES)
    return SynthSpec(
        n_classes=4, n_trials_per_class=100, n_channels=8,
        sampling_rate_hz=254.0, duration_s=2.5, class_signatures=sigs,
        noise_sigma=1.0, seed=seed,
        class_names=("up", "down", "right", "left"),
        channel_names=("F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2"))


def default_4class(snr: float, seed: int = 0) -> EpochSet:
    """4 classes x 100 trials, 8 channels, 2.5 s @ 254 Hz; class-specific band
    injections with amplitude = snr x noise sigma."""
    return generate(default_4class_spec(snr, seed))
