"""Write the test fixtures: a miniature BDF session tree, a miniature
six-word MAT file, and expected.json with values computed here,
independently of the TypeScript readers under test."""
import json
import math
import shutil
import struct
import sys
from pathlib import Path

import numpy as np
from scipy.io import savemat

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# --- BDF writing -----------------------------------------------------------

DIG_MIN, DIG_MAX = -8388608, 8388607
PHYS_MIN, PHYS_MAX = -262144.0, 262143.0  # ~1/32 uV per bit; exact in 8 ascii chars

FS = 128
RECORD_S = 1

EEG_LABELS = ["F3", "F4", "C3", "C4"]
AUX_LABELS = ["Status"]
SPANISH = ["arriba", "abajo", "derecha", "izquierda"]


def dig_to_phys(d):
    return (d - DIG_MIN) * (PHYS_MAX - PHYS_MIN) / (DIG_MAX - DIG_MIN) + PHYS_MIN


def digital_signal(subject, session, channel, n):
    """Deterministic content: sinusoid + per-channel offset + slow ramp."""
    freq = 4.0 + 2.0 * channel + 0.5 * session
    t = np.arange(n)
    wave = 4000 * np.sin(2 * math.pi * freq * t / FS)
    return np.round(wave + 997 * channel + 13 * subject + (t % 11)).astype(np.int64)


def ascii_field(value, width):
    s = str(value)
    assert len(s) <= width, (s, width)
    return s.ljust(width).encode("ascii")


def write_bdf(path, labels, digital, fs, record_s):
    n_sig = len(labels)
    n = digital[0].shape[0]
    assert n % (fs * record_s) == 0
    n_records = n // (fs * record_s)
    spr = fs * record_s

    hdr = bytearray()
    hdr += bytes([255]) + b"BIOSEMI"
    hdr += ascii_field("sub", 80)
    hdr += ascii_field("rec", 80)
    hdr += ascii_field("01.01.24", 8)
    hdr += ascii_field("10.00.00", 8)
    hdr += ascii_field(256 * (1 + n_sig), 8)
    hdr += ascii_field("24BIT", 44)
    hdr += ascii_field(n_records, 8)
    hdr += ascii_field(record_s, 8)
    hdr += ascii_field(n_sig, 4)
    for lab in labels:
        hdr += ascii_field(lab, 16)
    for _ in labels:
        hdr += ascii_field("AgAgCl electrode", 80)
    for _ in labels:
        hdr += ascii_field("uV", 8)
    for _ in labels:
        hdr += ascii_field(int(PHYS_MIN), 8)
    for _ in labels:
        hdr += ascii_field(int(PHYS_MAX), 8)
    for _ in labels:
        hdr += ascii_field(DIG_MIN, 8)
    for _ in labels:
        hdr += ascii_field(DIG_MAX, 8)
    for _ in labels:
        hdr += ascii_field("HP:0.5Hz LP:100Hz", 80)
    for _ in labels:
        hdr += ascii_field(spr, 8)
    for _ in labels:
        hdr += ascii_field("", 32)
    assert len(hdr) == 256 * (1 + n_sig)

    body = bytearray()
    for r in range(n_records):
        for sig in range(n_sig):
            chunk = digital[sig][r * spr:(r + 1) * spr]
            for d in chunk:
                body += struct.pack("<i", int(d))[:3]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(bytes(hdr) + bytes(body))


def make_tol(root):
    """2 subjects x 3 sessions; 8 trials/session: 4 inner (one per word),
    2 pronounced, 2 visualized. Trial onsets every 5 s starting at 1 s."""
    expected = {"subjects": {}}
    for subject in (1, 2):
        sub = f"sub-{subject:02d}"
        inner_per_class = [0, 0, 0, 0]
        first_trial = None
        for session in (1, 2, 3):
            ses = f"ses-{session:02d}"
            n_s = 45 * FS
            digital = [digital_signal(subject, session, c, n_s)
                       for c in range(len(EEG_LABELS))]
            digital.append(np.zeros(n_s, dtype=np.int64))  # Status
            eeg_dir = root / sub / ses / "eeg"
            stem = f"{sub}_{ses}_task-inner"
            write_bdf(eeg_dir / f"{stem}_eeg.bdf",
                      EEG_LABELS + AUX_LABELS, digital, FS, RECORD_S)

            rows = ["onset\tduration\tcondition\ttrial_type"]
            conditions = (["inner"] * 4 + ["pronounced", "visualized"] * 2)
            words = SPANISH + ["arriba", "abajo", "derecha", "izquierda"]
            for k, (cond, word) in enumerate(zip(conditions, words)):
                onset = 1.0 + 5.0 * k
                rows.append(f"{onset}\t4.5\t{cond}\t{word}")
                if cond == "inner":
                    inner_per_class[SPANISH.index(word)] += 1
                    if first_trial is None:
                        start = round((onset + 1.0) * FS)
                        first_trial = {
                            "label": SPANISH.index(word),
                            "n_samples": round(2.5 * FS),
                            "channel0_head": [
                                dig_to_phys(int(d))
                                for d in digital[0][start:start + 5]
                            ],
                        }
            (eeg_dir / f"{stem}_events.tsv").write_text("\n".join(rows) + "\n")
        expected["subjects"][sub] = {
            "n_epochs": sum(inner_per_class),
            "per_class": inner_per_class,
            "first_trial": first_trial,
        }
    expected["sampling_rate_hz"] = FS
    expected["channels"] = EEG_LABELS
    return expected


def make_tol_missing(root):
    """Subject with only two sessions."""
    for session in (1, 2):
        ses = f"ses-{session:02d}"
        n_s = 45 * FS
        digital = [digital_signal(9, session, c, n_s)
                   for c in range(len(EEG_LABELS))]
        eeg_dir = root / "sub-09" / ses / "eeg"
        stem = f"sub-09_{ses}_task-inner"
        write_bdf(eeg_dir / f"{stem}_eeg.bdf", EEG_LABELS, digital, FS, RECORD_S)
        (eeg_dir / f"{stem}_events.tsv").write_text(
            "onset\tduration\tcondition\ttrial_type\n1.0\t4.5\tinner\tarriba\n")


def make_tol_badlabel(root):
    src = FIXTURES / "tol" / "sub-01"
    dst = root / "sub-01"
    shutil.copytree(src, dst)
    events = next((dst / "ses-01" / "eeg").glob("*_events.tsv"))
    text = events.read_text().replace("arriba", "adelante", 1)
    events.write_text(text)


# --- MAT writing -----------------------------------------------------------

IS_CHANNELS = 6
IS_SAMPLES = 64


def make_is(root):
    """One subject: per word stimulus (6..11) 2 imagined + 1 pronounced
    trials, plus 2 imagined vowel trials (stimulus 1)."""
    rng = np.random.default_rng(7)
    rows = []
    meta = []
    for stim in range(6, 12):
        for modality in (1, 1, 2):
            meta.append((modality, stim, 1))
    meta.append((1, 1, 1))
    meta.append((1, 1, 2))
    signal_cols = IS_CHANNELS * IS_SAMPLES
    for k, (modality, stim, session) in enumerate(meta):
        base = 10.0 * stim + 100.0 * modality
        row = np.concatenate([
            base + k + np.sin(np.arange(signal_cols) / 7.0) + rng.normal(0, 0.1, signal_cols),
            [modality, stim, session],
        ])
        rows.append(row)
    eeg = np.vstack(rows)
    root.mkdir(parents=True, exist_ok=True)
    savemat(root / "S01.mat", {"EEG": eeg}, do_compression=False)

    imagined_words = [(k, m) for k, m in enumerate(meta) if m[0] == 1 and m[1] >= 6]
    first_k, first_meta = imagined_words[0]
    expected = {
        "n_epochs": len(imagined_words),
        "per_class": [
            sum(1 for _, m in imagined_words if m[1] == stim)
            for stim in range(6, 12)
        ],
        "n_samples": IS_SAMPLES,
        "first_trial": {
            "label": first_meta[1] - 6,
            # channel 1, samples 3..7 of the first imagined word trial
            "channel1_slice": [
                float(np.float32(eeg[first_k, 1 * IS_SAMPLES + t]))
                for t in range(3, 8)
            ],
        },
    }
    # spot value for the raw MAT reader: element (row 5, col 17)
    expected["raw_check"] = {"row": 5, "col": 17, "value": float(eeg[5, 17])}
    return expected


def main():
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    FIXTURES.mkdir(parents=True)
    expected = {
        "tol": make_tol(FIXTURES / "tol"),
        "is": make_is(FIXTURES / "is"),
    }
    make_tol_missing(FIXTURES / "tol_missing")
    make_tol_badlabel(FIXTURES / "tol_badlabel")
    (FIXTURES / "expected.json").write_text(json.dumps(expected, indent=2))
    print(f"fixtures written to {FIXTURES}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
