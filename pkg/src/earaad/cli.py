"""Command-line entry point: ``earaad <command> [options]``.

Commands
--------
synth       write a synthetic dataset (manifest + raw float32 files)
preprocess  CAR, band-pass and resample a dataset into a new directory
trf         attended / unattended forward TRFs as JSON plus a plot-ready CSV
decode      leave-one-trial-out decoding accuracy per window length
layout      list or show the built-in channel layouts

Exit codes: 0 success, 2 configuration or usage error, 3 data error.
Output files are written only after all computation has succeeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .decoder import CHANCE_LEVEL, DEFAULT_WINDOWS_S, Trial, evaluate
from .errors import ConfigError, DataError
from .layouts import BUILTIN_LAYOUTS, get_layout, resolve_layout
from .linmodel import (DEFAULT_LAMBDA_GRID, GramBlock, LagConfig, build_lag_matrix,
                       select_lambda, select_lambda_blocks)
from .signals import (DEFAULT_BAND, DEFAULT_TARGET_FS, BandpassSpec, design_bandpass, filtfilt,
                      preprocess_chain, preprocess_envelope, resample)
from .synth import SynthConfig, generate_dataset
from .trf import contrast_trfs, estimate_trf

log = logging.getLogger("earaad")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    return lo, hi


def _windows(text: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated seconds, got {text!r}") \
            from None
    if not out:
        raise argparse.ArgumentTypeError("empty window list")
    return out


def _lambda(text: str):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None
    if not np.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError("lambda must be a nonnegative number")
    return value


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="earaad", description="Auditory attention decoding pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--subjects", type=int, default=16)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--length-s", type=float, default=60.0)
    s.add_argument("--snr-db", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fs", type=float, default=DEFAULT_TARGET_FS)
    s.add_argument("--channels", type=int, default=20)
    s.add_argument("--distal-channels", type=int, default=0)
    s.add_argument("--attended-gain", type=float, default=1.5)
    s.add_argument("--unattended-gain", type=float, default=1.0)
    s.add_argument("--noise", choices=("white", "pink"), default="white")

    q = sub.add_parser("preprocess", help="re-reference, filter and resample a dataset")
    q.add_argument("--manifest", required=True, type=Path)
    q.add_argument("--band", type=_range, default=(DEFAULT_BAND.low_hz, DEFAULT_BAND.high_hz))
    q.add_argument("--order", type=int, default=DEFAULT_BAND.order)
    q.add_argument("--target-fs", type=float, default=DEFAULT_TARGET_FS)
    q.add_argument("--car", type=_on_off, default=True)
    q.add_argument("--envelope-exponent", type=float, default=1.0)
    q.add_argument("--out", required=True, type=Path)

    t = sub.add_parser("trf", help="estimate attended and unattended forward TRFs")
    t.add_argument("--manifest", required=True, type=Path)
    t.add_argument("--lags", type=_range, default=(-50.0, 450.0))
    t.add_argument("--lambda", dest="lam", type=_lambda, default=None)
    t.add_argument("--out", required=True, type=Path)

    d = sub.add_parser("decode", help="leave-one-trial-out decoding accuracy")
    d.add_argument("--manifest", required=True, type=Path)
    d.add_argument("--windows", type=_windows, default=DEFAULT_WINDOWS_S)
    d.add_argument("--layout", default="all")
    d.add_argument("--lags", type=_range, default=(-50.0, 450.0))
    d.add_argument("--lambda", dest="lam", type=_lambda, default=None)
    d.add_argument("--folds", type=int, default=5)
    d.add_argument("--pooled", action="store_true",
                   help="train on all subjects' other trials instead of subject-specific")
    d.add_argument("--out", required=True, type=Path)
    d.add_argument("--summary", type=Path, default=None)

    lay = sub.add_parser("layout", help="inspect built-in channel layouts")
    g = lay.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true")
    g.add_argument("--show", metavar="NAME")
    return p


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_outputs(files: dict) -> None:
    """Single write phase: every payload is already rendered to text."""
    for path, text in files.items():
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def cmd_synth(args) -> int:
    config = SynthConfig(n_subjects=args.subjects, trials_per_subject=args.trials,
                         trial_length_s=args.length_s, fs=args.fs, n_channels=args.channels,
                         n_distal_channels=args.distal_channels,
                         attended_gain=args.attended_gain, unattended_gain=args.unattended_gain,
                         snr_db=args.snr_db, seed=args.seed, noise=args.noise)
    trials = generate_dataset(config)
    dataio.write_dataset(trials, args.out)
    print(f"wrote {len(trials)} trials to {args.out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    manifest = dataio.read_manifest(args.manifest)
    band = BandpassSpec(args.band[0], args.band[1], args.order)
    band.check(manifest.fs_raw)
    processed = []
    for rec in manifest.trials:
        eeg = dataio.load_eeg(manifest.resolve(rec.eeg.path), rec.eeg.shape, rec.eeg.dtype,
                              manifest.fs_raw, manifest.channels)
        eeg = preprocess_chain(eeg, band, args.target_fs, car=args.car)
        cands = []
        for c in rec.candidates:
            if c.kind == "audio":
                audio = dataio.load_audio_wav(manifest.resolve(c.path))
                env = preprocess_envelope(audio, band, args.target_fs, args.envelope_exponent)
            else:
                env = dataio.load_envelope(manifest.resolve(c.path), c.length, c.fs)
                env = resample(filtfilt(env, design_bandpass(band, env.fs)), args.target_fs)
            cands.append(env)
        # rounding in resampling can leave streams a sample apart
        n = min([len(c) for c in cands] + [len(eeg)])
        if any(len(c) != n for c in cands) or len(eeg) != n:
            log.info("trimming %s/%s to %d samples", rec.subject, rec.trial, n)
            cands = [c.segment(0, n) for c in cands]
            eeg = eeg.segment(0, n)
        processed.append(Trial(eeg, tuple(cands), rec.attended_index, rec.subject, rec.trial,
                               tuple(c.azimuth_deg for c in rec.candidates)))
    dataio.write_dataset(processed, args.out)
    print(f"wrote {len(processed)} preprocessed trials to {args.out}")
    return EXIT_OK


def _auto_trf_lambda(trials, lags: LagConfig) -> float:
    blocks = [GramBlock.from_rows(build_lag_matrix(t.attended, lags, "forward").values,
                                  t.eeg.samples) for t in trials]
    if len(blocks) >= 2:
        best, _ = select_lambda_blocks(blocks, DEFAULT_LAMBDA_GRID)
    else:
        X = build_lag_matrix(trials[0].attended, lags, "forward")
        best, _ = select_lambda(X, trials[0].eeg.samples)
    return best


def cmd_trf(args) -> int:
    manifest = dataio.read_manifest(args.manifest)
    trials = dataio.load_trials(manifest)
    lags = LagConfig(args.lags[0], args.lags[1], manifest.fs_raw)
    lam = args.lam if args.lam is not None else _auto_trf_lambda(trials, lags)
    items = [(t, [estimate_trf(c, t.eeg, lags, lam) for c in t.candidates]) for t in trials]
    contrast = contrast_trfs(items)
    doc = contrast.to_dict()
    doc["lambda_selection"] = "fixed" if args.lam is not None else "auto"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lag_ms", "channel", "attended", "unattended"])
    for i, lag in enumerate(contrast.attended.lag_axis_ms):
        for j, ch in enumerate(contrast.attended.channels):
            w.writerow([f"{lag:g}", ch, f"{contrast.attended.weights[i, j]:.9g}",
                        f"{contrast.unattended.weights[i, j]:.9g}"])
    csv_path = args.out.with_suffix(".csv")
    _write_outputs({args.out: _dump_json(doc), csv_path: buf.getvalue()})
    print(f"attended peak {contrast.attended_peak:.4g}, "
          f"unattended peak {contrast.unattended_peak:.4g} (lambda {lam:g})")
    return EXIT_OK


def cmd_decode(args) -> int:
    manifest = dataio.read_manifest(args.manifest)
    layout = resolve_layout(args.layout)
    trials = dataio.load_trials(manifest)
    lags = LagConfig(args.lags[0], args.lags[1], manifest.fs_raw)
    table = evaluate(trials, args.windows, layout=layout, lags=lags, lam=args.lam,
                     folds=args.folds, subject_specific=not args.pooled)
    files = {args.out: table.to_csv()}
    if args.summary is not None:
        files[args.summary] = _dump_json({
            "chance": CHANCE_LEVEL,
            "layout": "all" if layout is None else layout.name,
            "lambda": "auto" if args.lam is None else args.lam,
            "subject_specific": not args.pooled,
            "windows": table.summary(),
        })
    _write_outputs(files)
    for row in table.summary():
        print(f"{row['window_s']:>5g} s  accuracy {row['mean_accuracy']:.3f}"
              f"  p={row['p_value']:.3g}")
    return EXIT_OK


def cmd_layout(args) -> int:
    if args.list:
        for name in sorted(BUILTIN_LAYOUTS):
            print(f"{name}\t{len(BUILTIN_LAYOUTS[name].channels)}")
    else:
        for label in get_layout(args.show).channels:
            print(label)
    return EXIT_OK


_COMMANDS = {"synth": cmd_synth, "preprocess": cmd_preprocess, "trf": cmd_trf,
             "decode": cmd_decode, "layout": cmd_layout}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


run_cli = main

if __name__ == "__main__":
    sys.exit(main())
