import csv
import json
from pathlib import Path

import numpy as np
import pytest

from pulseboard.cli import main
from pulseboard.frames import Frame, serialize_ppm


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def _simulate(capsys, tmp_path, name="a", **overrides):
    trace = tmp_path / f"{name}_trace.csv"
    truth = tmp_path / f"{name}_truth.csv"
    args = ["simulate", "--out-trace", trace, "--out-truth", truth,
            "--duration", 60, "--base-bpm", 72, "--snr-db", 10, "--seed", 3]
    for k, v in overrides.items():
        args += [f"--{k.replace('_', '-')}", v]
    code, out, err = run(capsys, *args)
    assert code == 0, err
    return trace, truth


def test_simulate_writes_both_files(tmp_path, capsys):
    trace, truth = _simulate(capsys, tmp_path)
    assert trace.read_text().startswith("t_ms,value\n")
    assert truth.read_text().startswith("t_ms,bpm,confidence\n")


def test_simulate_deterministic(tmp_path, capsys):
    t1, g1 = _simulate(capsys, tmp_path, "one")
    t2, g2 = _simulate(capsys, tmp_path, "two")
    assert t1.read_bytes() == t2.read_bytes()
    assert g1.read_bytes() == g2.read_bytes()


def test_simulate_truth_matches_closed_form(tmp_path, capsys):
    trace, truth = _simulate(capsys, tmp_path, modulation_bpm=8,
                             modulation_freq=0.1)
    rows = list(csv.DictReader(open(truth)))
    t = np.array([int(r["t_ms"]) for r in rows]) / 1000.0
    bpm = np.array([float(r["bpm"]) for r in rows])
    want = 72 + 8 * np.sin(2 * np.pi * 0.1 * t)
    # slack: 3-decimal csv rounding plus rate slope across the <=0.5 ms
    # timestamp quantization (2*pi*0.1*8*0.0005 ~ 0.0025)
    assert np.max(np.abs(bpm - want)) < 3.1e-3


def test_simulate_band_violation_exits_2(tmp_path, capsys):
    code, _, err = run(capsys, "simulate",
                       "--out-trace", tmp_path / "t.csv",
                       "--out-truth", tmp_path / "g.csv",
                       "--base-bpm", 30)
    assert code == 2
    assert "error:" in err
    assert not (tmp_path / "t.csv").exists()


def test_simulate_snr_and_sigma_conflict(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--out-trace", "x", "--out-truth", "y",
              "--snr-db", "10", "--noise-sigma", "0.1"])
    assert exc.value.code == 2


def test_estimate_recovers_rate(tmp_path, capsys):
    trace, _ = _simulate(capsys, tmp_path)
    out = tmp_path / "hr.csv"
    code, stdout, _ = run(capsys, "estimate", "--trace", trace, "--out", out)
    assert code == 0
    mean = float(stdout.split()[1])
    assert 70.0 <= mean <= 74.0
    assert "low confidence" in stdout
    assert out.read_text().startswith("t_ms,bpm,confidence\n")


def test_estimate_deterministic(tmp_path, capsys):
    trace, _ = _simulate(capsys, tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "estimate", "--trace", trace, "--out", a)[0] == 0
    assert run(capsys, "estimate", "--trace", trace, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_estimate_empty_input(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    out = tmp_path / "hr.csv"
    code, _, err = run(capsys, "estimate", "--trace", empty, "--out", out)
    assert code == 2
    assert "empty.csv" in err
    assert not out.exists()  # no partial output


def _write_frames(tmp_path, values, w=8, h=6):
    """One flat-G frame per value; mean over any roi is the value itself."""
    d = tmp_path / "frames"
    d.mkdir()
    for i, g in enumerate(values):
        px = bytes([10, int(g), 20]) * (w * h)
        (d / f"frame_{i:05d}.ppm").write_bytes(serialize_ppm(Frame(w, h, px)))
    roi = tmp_path / "roi.csv"
    roi.write_text("frame_index,x,y,w,h\n0,1,1,5,4\n")
    return d, roi


def test_frames_mode_equals_trace_mode(tmp_path, capsys):
    # same sample values through both front ends -> byte-identical estimates
    n = 900  # 30 s at 30 fps
    t = np.arange(n) / 30.0
    values = np.round(128 + 60 * np.sin(2 * np.pi * 1.2 * t)).astype(int)
    frames_dir, roi = _write_frames(tmp_path, values)
    trace_csv = tmp_path / "trace.csv"
    with open(trace_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ms", "value"])
        for i, v in enumerate(values):
            w.writerow([round(i * 1000 / 30), f"{float(v):.6f}"])
    out_f, out_t = tmp_path / "hr_frames.csv", tmp_path / "hr_trace.csv"
    assert run(capsys, "estimate", "--frames", frames_dir, "--roi", roi,
               "--out", out_f)[0] == 0
    assert run(capsys, "estimate", "--trace", trace_csv, "--out", out_t)[0] == 0
    assert out_f.read_bytes() == out_t.read_bytes()


def test_frames_without_roi(tmp_path, capsys):
    code, _, err = run(capsys, "estimate", "--frames", tmp_path, "--out",
                       tmp_path / "x.csv")
    assert code == 2 and "--roi" in err


def test_validate_writes_report_and_figure(tmp_path, capsys):
    trace, truth = _simulate(capsys, tmp_path, modulation_bpm=8)
    hr = tmp_path / "hr.csv"
    run(capsys, "estimate", "--trace", trace, "--out", hr)
    code, stdout, _ = run(capsys, "validate", "--estimate", hr,
                          "--truth", truth)
    assert code == 0
    assert "pearson_r" in stdout and "rmse_bpm" in stdout
    rep = json.loads((tmp_path / "hr.validation.json").read_text())
    assert rep["pearson_r"] > 0.8
    assert (tmp_path / "hr.validation.png").exists()


def test_validate_no_figure(tmp_path, capsys):
    trace, truth = _simulate(capsys, tmp_path)
    hr = tmp_path / "hr.csv"
    run(capsys, "estimate", "--trace", trace, "--out", hr)
    code, stdout, _ = run(capsys, "validate", "--estimate", hr,
                          "--truth", truth, "--no-figure",
                          "--out-json", tmp_path / "v.json")
    assert code == 0
    assert not (tmp_path / "hr.validation.png").exists()
    assert (tmp_path / "v.json").exists()
    # constant truth: correlation is undefined, exit still 0
    assert "undefined (zero variance)" in stdout


def test_validate_short_overlap(tmp_path, capsys):
    hr = tmp_path / "hr.csv"
    hr.write_text("t_ms,bpm,confidence\n" + "".join(
        f"{i * 1000},72.000,0.9000\n" for i in range(10)
    ))
    code, _, err = run(capsys, "validate", "--estimate", hr, "--truth", hr,
                       "--no-figure")
    assert code == 2
    assert "overlap" in err


def test_figures_are_opt_in_for_estimate(tmp_path, capsys):
    trace, _ = _simulate(capsys, tmp_path)
    out = tmp_path / "hr.csv"
    fig = tmp_path / "hr.png"
    assert run(capsys, "estimate", "--trace", trace, "--out", out)[0] == 0
    assert not fig.exists()
    assert run(capsys, "estimate", "--trace", trace, "--out", out,
               "--figure", fig)[0] == 0
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def _write_responses(path, n=6):
    rng = np.random.default_rng(1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "participant", "condition"]
                   + [f"item_{i}" for i in range(1, 22)])
        for p in range(n):
            base = rng.integers(0, 4, 21)
            for cond in ("hr_all", "hr_others", "hr_none"):
                items = np.clip(base + rng.integers(0, 2, 21), 0, 4)
                w.writerow([p % 3, f"p{p}", cond] + [int(v) for v in items])


def test_analyze_default_mapping_is_labeled(tmp_path, capsys):
    resp = tmp_path / "resp.csv"
    _write_responses(resp)
    code, stdout, _ = run(capsys, "analyze", "--responses", resp)
    assert code == 0
    assert "NON-CANONICAL" in stdout
    assert (tmp_path / "resp.analysis.json").exists()
    assert (tmp_path / "resp.analysis.png").exists()


def test_analyze_incomplete_design(tmp_path, capsys):
    resp = tmp_path / "resp.csv"
    _write_responses(resp)
    lines = resp.read_text().splitlines()
    resp.write_text("\n".join(lines[:-1]) + "\n")  # drop one condition row
    code, _, err = run(capsys, "analyze", "--responses", resp, "--no-figure")
    assert code == 2
    assert "missing" in err


def test_serve_rejects_two_seat_config(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({
        "seats": [
            {"seat": 0, "name": "a", "source": {"kind": "synthetic"}},
            {"seat": 1, "name": "b", "source": {"kind": "synthetic"}},
        ],
        "tcp_port": 0,
    }))
    code, _, err = run(capsys, "serve", "--config", cfg)
    assert code == 2
    assert "3" in err


def test_serve_missing_config(tmp_path, capsys):
    code, _, err = run(capsys, "serve", "--config", tmp_path / "nope.json")
    assert code == 2


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
