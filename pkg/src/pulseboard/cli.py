"""Command-line front end: one subcommand per pipeline stage.

Batch subcommands are deterministic for fixed inputs and seeds, and never
leave partial output files behind: everything is written to a temp file in
the destination directory and renamed into place on success.

Exit codes: 0 success, 2 usage/config/data errors, 1 unexpected failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import tempfile
import traceback
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, PipelineError
from .estimator import (
    LOW_CONFIDENCE,
    EstimatorConfig,
    estimate_hr,
    read_hr_csv,
    write_hr_csv,
)
from .frames import mean_channel, parse_ppm, read_roi_sidecar, roi_track
from .spgq import DEFAULT_MAPPING, condition_report, read_mapping_csv, read_responses_csv
from .synth import SynthSpec, noise_sigma_for_snr_db, synth_ppg
from .trace import Trace, read_trace_csv, write_trace_csv
from .validate import align_and_compare, read_beats_csv, rr_to_hr
from .wavelet import CardiacBand


def _atomic_write(path, writer) -> None:
    """Run writer(tmp_path), then rename over the destination."""
    dest = Path(path)
    fd, tmp = tempfile.mkstemp(dir=dest.parent or Path("."),
                               prefix=dest.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, dest)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_text(path, text: str) -> None:
    _atomic_write(path, lambda tmp: Path(tmp).write_text(text))


def _estimator_config(args) -> EstimatorConfig:
    return EstimatorConfig(
        fs=args.fs,
        band=CardiacBand(args.band_low / 60.0, args.band_high / 60.0),
        n_scales=args.scales,
        window_s=args.window,
        hop_s=args.hop,
        detrend_window_s=args.detrend_window,
    )


def _add_estimator_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("estimator")
    g.add_argument("--fs", type=float, default=30.0,
                   help="analysis grid rate in Hz (default 30)")
    g.add_argument("--band-low", type=float, default=40.0, metavar="BPM",
                   help="band floor (default 40)")
    g.add_argument("--band-high", type=float, default=200.0, metavar="BPM",
                   help="band ceiling (default 200)")
    g.add_argument("--scales", type=int, default=64,
                   help="scales across the band (default 64)")
    g.add_argument("--window", type=float, default=20.0, metavar="SEC",
                   help="analysis window (default 20)")
    g.add_argument("--hop", type=float, default=1.0, metavar="SEC",
                   help="emission cadence (default 1)")
    g.add_argument("--detrend-window", type=float, default=2.0, metavar="SEC",
                   help="moving-average detrend span (default 2)")


# -- simulate -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    sigma = args.noise_sigma if args.noise_sigma is not None else 0.0
    if args.snr_db is not None:
        sigma = noise_sigma_for_snr_db(args.snr_db)
    spec = SynthSpec(
        duration=args.duration,
        fs=args.fs,
        base_bpm=args.base_bpm,
        modulation_bpm=args.modulation_bpm,
        modulation_freq=args.modulation_freq,
        noise_sigma=sigma,
        drift_amp=args.drift_amp,
        drift_freq=args.drift_freq,
        seed=args.seed,
    )
    trace, truth = synth_ppg(spec)
    _atomic_write(args.out_trace, lambda tmp: write_trace_csv(tmp, trace))
    _atomic_write(args.out_truth, lambda tmp: write_hr_csv(tmp, truth))
    if args.figure:
        from .report import save_synth_figure
        _atomic_write(args.figure,
                      lambda tmp: save_synth_figure(tmp, trace, truth))
    print(
        f"wrote {args.out_trace} and {args.out_truth}: "
        f"{len(trace.t)} samples, {args.duration:g} s at {args.fs:g} Hz"
    )
    return 0


# -- estimate -------------------------------------------------------------------

def _trace_from_frames(frames_dir, roi_path, channel: str, fps: float) -> Trace:
    paths = sorted(Path(frames_dir).glob("*.ppm"))
    if not paths:
        raise ParseError(f"no .ppm frames in {frames_dir}")
    track = roi_track(read_roi_sidecar(roi_path), len(paths))
    t, v = [], []
    for i, p in enumerate(paths):
        frame = parse_ppm(p.read_bytes())
        v.append(mean_channel(frame, track[i], channel))
        # quantize to the wire resolution so frames and CSV replay agree exactly
        t.append(round(i * 1000.0 / fps) / 1000.0)
    return Trace(t, v, nominal_fs=fps)


def cmd_estimate(args) -> int:
    if args.frames is not None and args.roi is None:
        raise ConfigError("--frames needs --roi")
    if args.trace is not None:
        trace = read_trace_csv(args.trace)
    else:
        trace = _trace_from_frames(args.frames, args.roi, args.channel, args.fps)
    hr = estimate_hr(trace, _estimator_config(args))
    _atomic_write(args.out, lambda tmp: write_hr_csv(tmp, hr))
    if args.figure:
        from .report import save_hr_figure
        _atomic_write(args.figure, lambda tmp: save_hr_figure(tmp, hr))
    low = float(np.mean(hr.confidence < LOW_CONFIDENCE)) * 100.0
    print(
        f"mean {float(np.mean(hr.bpm)):.2f} BPM over {len(hr.t)} samples, "
        f"{low:.1f}% low confidence"
    )
    return 0


# -- validate -------------------------------------------------------------------

def cmd_validate(args) -> int:
    est = read_hr_csv(args.estimate)
    if args.truth is not None:
        ref = read_hr_csv(args.truth)
    else:
        ref = rr_to_hr(read_beats_csv(args.beats))
    report = align_and_compare(est, ref, max_lag=args.max_lag)
    stem = str(Path(args.estimate).with_suffix(""))
    out_json = args.out_json or stem + ".validation.json"
    _write_text(out_json, report.to_json())
    if not args.no_figure:
        from .report import save_validation_figure
        fig_path = args.figure or stem + ".validation.png"
        _atomic_write(fig_path,
                      lambda tmp: save_validation_figure(tmp, est, ref, report))
    sys.stdout.write(report.to_text())
    return 0


# -- serve ----------------------------------------------------------------------

def cmd_serve(args) -> int:
    level = os.environ.get("PULSEBOARD_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    from .server import load_server_config, serve_forever

    config = load_server_config(args.config)
    listen = os.environ.get("PULSEBOARD_LISTEN")
    if listen:
        config = dataclasses.replace(config, listen=listen)
    serve_forever(config)
    return 0


# -- analyze --------------------------------------------------------------------

def cmd_analyze(args) -> int:
    responses = read_responses_csv(args.responses)
    mapping = read_mapping_csv(args.mapping) if args.mapping else DEFAULT_MAPPING
    report = condition_report(responses, mapping)
    stem = str(Path(args.responses).with_suffix(""))
    out_json = args.out_json or stem + ".analysis.json"
    _write_text(out_json, report.to_json())
    if not args.no_figure:
        from .report import save_analysis_figure
        fig_path = args.figure or stem + ".analysis.png"
        _atomic_write(fig_path,
                      lambda tmp: save_analysis_figure(tmp, report))
    sys.stdout.write(report.to_text())
    return 0


# -- parser ---------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulseboard",
        description="pulse-rate estimation, validation, live sessions, and "
                    "questionnaire analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic trace with ground truth")
    p.add_argument("--out-trace", required=True, help="trace CSV destination")
    p.add_argument("--out-truth", required=True, help="ground-truth rate CSV destination")
    p.add_argument("--duration", type=float, default=60.0, metavar="SEC")
    p.add_argument("--fs", type=float, default=30.0, metavar="HZ")
    p.add_argument("--base-bpm", type=float, default=72.0)
    p.add_argument("--modulation-bpm", type=float, default=0.0,
                   help="rate swing amplitude around the base")
    p.add_argument("--modulation-freq", type=float, default=0.1, metavar="HZ")
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--snr-db", type=float, default=None)
    noise.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--drift-amp", type=float, default=0.0)
    p.add_argument("--drift-freq", type=float, default=0.05, metavar="HZ")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figure", metavar="PNG", default=None,
                   help="also render an overview figure")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate heart rate from a trace or frames")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace CSV input")
    src.add_argument("--frames", help="directory of PPM frames")
    p.add_argument("--roi", help="face-box sidecar CSV (frames mode)")
    p.add_argument("--channel", choices=["R", "G", "B"], default="G")
    p.add_argument("--fps", type=float, default=30.0,
                   help="frame timestamp rate (frames mode, default 30)")
    p.add_argument("--out", required=True, help="rate CSV destination")
    p.add_argument("--figure", metavar="PNG", default=None,
                   help="also render the rate curve")
    _add_estimator_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("validate", help="score an estimate against a reference")
    p.add_argument("--estimate", required=True, help="rate CSV to score")
    ref = p.add_mutually_exclusive_group(required=True)
    ref.add_argument("--truth", help="reference rate CSV")
    ref.add_argument("--beats", help="reference beat-times CSV")
    p.add_argument("--max-lag", action="store_true",
                   help="allow a +-2 s alignment shift")
    p.add_argument("--out-json", default=None,
                   help="report JSON (default: <estimate>.validation.json)")
    p.add_argument("--figure", metavar="PNG", default=None,
                   help="overlay figure (default: <estimate>.validation.png)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the live session server")
    p.add_argument("--config", required=True, help="session config JSON")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze", help="score questionnaires and compare conditions")
    p.add_argument("--responses", required=True, help="responses CSV")
    p.add_argument("--mapping", default=None,
                   help="item mapping CSV (default: built-in NON-CANONICAL placeholder)")
    p.add_argument("--out-json", default=None,
                   help="report JSON (default: <responses>.analysis.json)")
    p.add_argument("--figure", metavar="PNG", default=None,
                   help="bar-chart figure (default: <responses>.analysis.png)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
