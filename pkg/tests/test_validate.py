from __future__ import annotations

import numpy as np
import pytest

from pulseboard.errors import (
    ConfigError,
    InsufficientData,
    InsufficientOverlap,
    UndefinedCorrelation,
)
from pulseboard.estimator import HrTrace
from pulseboard.validate import (
    RrSeries,
    align_and_compare,
    pearson,
    read_beats_csv,
    rr_to_hr,
    write_beats_csv,
)

from oracles import pearson_loop


def test_pearson_self_and_anti():
    rng = np.random.default_rng(2)
    x = rng.normal(0, 3, 200)
    assert abs(pearson(x, x) - 1.0) < 1e-12
    assert abs(pearson(x, -x + 5.0) + 1.0) < 1e-12


def test_pearson_matches_loop_oracle():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = int(rng.integers(3, 80))
        a = rng.normal(0, rng.uniform(0.1, 100), n)
        b = 0.4 * a + rng.normal(0, rng.uniform(0.1, 50), n)
        assert abs(pearson(a, b) - pearson_loop(list(a), list(b))) < 1e-10


def test_pearson_zero_variance_raises():
    with pytest.raises(UndefinedCorrelation):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(InsufficientData):
        pearson([1.0], [2.0])


def test_rr_series_flags_implausible_gaps():
    rr = RrSeries([0.0, 0.8, 3.0, 3.2])
    assert list(rr.flagged) == [False, True, True]
    with pytest.raises(ConfigError):
        RrSeries([0.0, 1.0, 0.5])
    with pytest.raises(InsufficientData):
        RrSeries([1.0])


def test_rr_to_hr_examples():
    # three beats half a second apart -> one 120 BPM sample
    hr = rr_to_hr(RrSeries([0.0, 0.5, 1.0]))
    assert np.allclose(hr.bpm, 120.0)
    # metronome seconds -> constant 60
    hr = rr_to_hr(RrSeries([0.0, 1.0, 2.0, 3.0]))
    assert np.allclose(hr.bpm, 60.0)
    assert hr.t[0] == 0.5 and hr.t[-1] <= 2.5
    with pytest.raises(InsufficientData):
        rr_to_hr(RrSeries([0.0, 1.0]))


def test_rr_to_hr_clips_into_range():
    hr = rr_to_hr(RrSeries([0.0, 2.0, 4.0, 6.0]))  # 30 BPM gaps
    assert np.all(hr.bpm == 40.0)


def _hr(t, bpm, conf=None):
    t = np.asarray(t, dtype=float)
    bpm = np.asarray(bpm, dtype=float)
    if conf is None:
        conf = np.ones(len(t))
    return HrTrace(t, bpm, conf)


def test_align_identical_traces():
    t = np.arange(0.0, 60.0)
    bpm = 70 + 5 * np.sin(0.1 * t)
    rep = align_and_compare(_hr(t, bpm), _hr(t, bpm))
    assert rep.pearson_r == 1.0
    assert rep.rmse_bpm == 0.0
    assert rep.mean_abs_err_bpm == 0.0
    assert rep.n_samples == 60
    assert rep.n_excluded == 0


def test_align_requires_overlap():
    a = _hr(np.arange(0.0, 40.0), np.full(40, 70.0))
    b = _hr(np.arange(25.0, 60.0), np.full(35, 70.0))
    with pytest.raises(InsufficientOverlap):
        align_and_compare(a, b)


def test_align_excludes_zero_confidence():
    t = np.arange(0.0, 50.0)
    bpm = 70 + 3 * np.sin(0.3 * t)
    conf = np.ones(50)
    conf[10:15] = 0.0
    rep = align_and_compare(_hr(t, bpm, conf), _hr(t, bpm))
    assert rep.n_excluded == 5
    assert rep.n_samples == 45
    assert rep.pearson_r == 1.0


def test_align_constant_reference_reports_undefined_r():
    t = np.arange(0.0, 45.0)
    rng = np.random.default_rng(4)
    jitter = rng.normal(0, 1.5, 45)
    rep = align_and_compare(_hr(t, 70.0 + jitter), _hr(t, np.full(45, 70.0)))
    assert rep.pearson_r is None
    assert abs(rep.rmse_bpm - np.sqrt(np.mean(jitter**2))) < 1e-9
    assert "undefined" in rep.to_text()
    assert rep.to_dict()["pearson_r"] is None


def test_align_rmse_never_below_mae():
    rng = np.random.default_rng(12)
    t = np.arange(0.0, 40.0)
    for _ in range(20):
        a = 60 + rng.uniform(0, 40) + rng.normal(0, 5, 40).cumsum() * 0.1
        b = a + rng.normal(0, rng.uniform(0.1, 8), 40)
        a, b = np.clip(a, 40, 200), np.clip(b, 40, 200)
        rep = align_and_compare(_hr(t, a), _hr(t, b))
        assert rep.rmse_bpm >= rep.mean_abs_err_bpm


def test_align_max_lag_recovers_shift():
    t = np.arange(0.0, 80.0)
    bpm = 75 + 10 * np.sin(2 * np.pi * t / 25)
    truth = _hr(t, bpm)
    est = _hr(t + 1.5, bpm)  # same curve reported 1.5 s late
    plain = align_and_compare(est, truth)
    lagged = align_and_compare(est, truth, max_lag=True)
    assert lagged.pearson_r > plain.pearson_r
    assert abs(lagged.lag_s + 1.5) < 0.11
    assert plain.lag_s == 0.0


def test_beats_csv_round_trip(tmp_path):
    rr = RrSeries([0.5, 1.4, 2.2, 3.1])
    p = tmp_path / "beats.csv"
    write_beats_csv(p, rr)
    back = read_beats_csv(p)
    assert np.allclose(back.beats, rr.beats)
    assert p.read_text().splitlines()[0] == "beat_t_ms"
