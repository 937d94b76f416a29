"""Command-line experiment runner.

Subcommands: validate, preprocess, featurize, train, eval, report, synth.
Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import dsp
from .core import load_epochset, save_epochset
from .exceptions import (
    ConfigInvalid,
    InnerspeechError,
    MalformedHeader,
    NonFiniteLoss,
    NonFiniteSample,
    ShapeMismatch,
)
from .features import build_feature_matrix
from .pipeline import PipelineConfig, load_report_json, run
from .evaluate import emit_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def cmd_synth(args) -> int:
    from .synth import default_4class, default_4class_spec
    es = default_4class(args.snr, args.seed)
    save_epochset(es, args.out)
    with open(args.out + ".spec.json", "w", encoding="utf-8") as fh:
        fh.write(default_4class_spec(args.snr, args.seed).to_json())
    print(f"wrote {args.out}.json / {args.out}.f32 "
          f"({len(es)} epochs, {len(es.channels)} channels)")
    return EXIT_OK


def cmd_validate(args) -> int:
    """Diagnostics only: header/tensor consistency, class balance, dead channels."""
    try:
        es = load_epochset(args.path)
    except (MalformedHeader, ShapeMismatch, NonFiniteSample, OSError) as exc:
        print(f"FAIL: {exc}")
        return EXIT_DATA
    labels = es.labels
    counts = {name: int((labels == i).sum())
              for i, name in enumerate(es.class_names)}
    print(f"OK: {len(es)} epochs, {len(es.channels)} channels, "
          f"{es.sampling_rate_hz:g} Hz")
    print("class counts: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    if es.epochs:
        tensor = es.tensor()
        variances = tensor.var(axis=(0, 2))
        for ch, v in zip(es.channels, variances):
            if v == 0:
                print(f"WARNING: dead channel {ch.name} (zero variance)")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    if args.profile not in dsp.PROFILES:
        print(f"unknown profile {args.profile!r}; "
              f"choose from {sorted(dsp.PROFILES)}", file=sys.stderr)
        return EXIT_CONFIG
    es = load_epochset(args.input)
    out = dsp.preprocess_epochset(es, dsp.PROFILES[args.profile])
    save_epochset(out, args.out)
    print(f"wrote {args.out}.json / {args.out}.f32 at "
          f"{out.sampling_rate_hz:g} Hz")
    return EXIT_OK


def cmd_featurize(args) -> int:
    es = load_epochset(args.input)
    bands = (dsp.ALPHA, dsp.BETA,
             dsp.GAMMA_NARROW if args.narrow_gamma else dsp.GAMMA)
    fm = build_feature_matrix(es, bands)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"{ch}:{band}" for ch, band in fm.provenance])
        for label, row in zip(fm.labels, fm.values):
            w.writerow([int(label)] + [f"{v:.8f}" for v in row])
    print(f"wrote {args.out} ({fm.values.shape[0]} x {fm.values.shape[1]})")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _read_config(args.config)
    config.validate()
    from .pipeline import _load_datasets, _prepare, _bands_for, _classifier_factory
    from .nets import shape_input
    datasets = _load_datasets(config)
    subject, es = sorted(datasets.items())[0]
    es = _prepare(es, config)
    make = _classifier_factory(config.classifier, config.classifier_params,
                               config.seed)
    model = make()
    if config.regime == "psd_features":
        fm = build_feature_matrix(es, _bands_for(config))
        model.fit(fm.values, fm.labels)
    else:
        model.fit(shape_input(config.regime, es), es.labels)
    if hasattr(model, "save"):
        model.save(args.out)
        print(f"wrote {args.out}.json / {args.out}.f32")
    else:
        with open(args.out + ".json", "w", encoding="utf-8") as fh:
            fh.write(model.to_json())
        print(f"wrote {args.out}.json")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _read_config(args.config)
    report = run(config)
    avg = report.average
    for sid in sorted(report.subjects):
        print(f"{sid}: accuracy={report.subjects[sid].accuracy:.4f}")
    print(f"average: accuracy={avg.accuracy:.4f} (chance {report.chance:.4f})")
    print(f"report written to {config.out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    report = load_report_json(args.report)
    emit_report(report, args.out)
    print(f"re-emitted report to {args.out}")
    return EXIT_OK


def _read_config(path: str) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return PipelineConfig.from_json(fh.read())
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config {path} is not valid JSON: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="innerspeech",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic 4-class dataset")
    s.add_argument("--snr", type=float, default=10.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output base path (no extension)")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("validate", help="check a canonical dataset")
    s.add_argument("path")
    s.set_defaults(fn=cmd_validate)

    s = sub.add_parser("preprocess", help="apply a named preprocessing profile")
    s.add_argument("--profile", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_preprocess)

    s = sub.add_parser("featurize", help="export band-power features as CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--narrow-gamma", action="store_true",
                   help="truncate gamma to 30-40 Hz")
    s.set_defaults(fn=cmd_featurize)

    s = sub.add_parser("train", help="train one classifier on a full dataset")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("eval", help="run a full cross-validated experiment")
    s.add_argument("--config", required=True)
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("report", help="re-emit CSV/SVG from a saved report")
    s.add_argument("--report", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MalformedHeader, ShapeMismatch, NonFiniteSample, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteLoss, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InnerspeechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
