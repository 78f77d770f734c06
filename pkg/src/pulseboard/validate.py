"""Agreement between an estimated rate trace and a reference recording."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    InsufficientData,
    InsufficientOverlap,
    ParseError,
    UndefinedCorrelation,
)
from .estimator import BPM_CEIL, BPM_FLOOR, HrTrace

# physiologically plausible beat-to-beat gap, seconds
RR_GAP_MIN = 60.0 / BPM_CEIL
RR_GAP_MAX = 60.0 / BPM_FLOOR

MIN_OVERLAP_S = 30.0
GRID_HZ = 1.0
MAX_LAG_S = 2.0
_LAG_STEP_S = 0.1


@dataclass(frozen=True)
class RrSeries:
    """Beat event times in seconds. Gaps outside the plausible range are
    flagged, not rejected; a dropped beat looks like a long gap."""

    beats: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beats, dtype=float)
        object.__setattr__(self, "beats", b)
        if b.ndim != 1 or len(b) < 2:
            raise InsufficientData("need at least 2 beat times")
        if not np.all(np.diff(b) > 0):
            raise ConfigError("beat times not strictly increasing")

    @property
    def flagged(self) -> np.ndarray:
        """Per-gap mask, True where the gap is implausible."""
        gaps = np.diff(self.beats)
        return (gaps < RR_GAP_MIN) | (gaps > RR_GAP_MAX)


def rr_to_hr(rr: RrSeries, fs: float = GRID_HZ) -> HrTrace:
    """Instantaneous rate from beat gaps, resampled to a uniform grid.

    Each gap contributes 60/gap at its midpoint; linear interpolation fills
    the grid between the first and last midpoint. Rates are clipped into
    [40, 200] so flagged gaps cannot poison downstream comparisons.
    """
    if len(rr.beats) < 3:
        raise InsufficientData("need at least 3 beats for a rate curve")
    if fs <= 0:
        raise ConfigError("fs must be positive")
    gaps = np.diff(rr.beats)
    mids = rr.beats[:-1] + gaps / 2.0
    inst = 60.0 / gaps
    n = int(math.floor((mids[-1] - mids[0]) * fs + 1e-9)) + 1
    grid = mids[0] + np.arange(n) / fs
    bpm = np.clip(np.interp(grid, mids, inst), BPM_FLOOR, BPM_CEIL)
    return HrTrace(grid, bpm, np.ones(n))


def pearson(a, b) -> float:
    """Plain two-pass Pearson correlation.

    Raises UndefinedCorrelation when either side has zero variance; a
    silent 0 would read as "no relationship", which is a different claim.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError("inputs must be 1-d and equally long")
    if len(a) < 2:
        raise InsufficientData("need at least 2 points")
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise UndefinedCorrelation("zero variance input")
    return float((da @ db) / math.sqrt(va * vb))


@dataclass(frozen=True)
class ValidationReport:
    pearson_r: float | None
    rmse_bpm: float
    mean_abs_err_bpm: float
    n_samples: int
    n_excluded: int
    duration_s: float
    lag_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "pearson_r": self.pearson_r,
            "rmse_bpm": self.rmse_bpm,
            "mean_abs_err_bpm": self.mean_abs_err_bpm,
            "n_samples": self.n_samples,
            "n_excluded": self.n_excluded,
            "duration_s": self.duration_s,
            "lag_s": self.lag_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        r = "undefined (zero variance)" if self.pearson_r is None \
            else f"{self.pearson_r:.3f}"
        lines = [
            f"pearson_r        {r}",
            f"rmse_bpm         {self.rmse_bpm:.3f}",
            f"mean_abs_err_bpm {self.mean_abs_err_bpm:.3f}",
            f"n_samples        {self.n_samples}",
            f"n_excluded       {self.n_excluded}",
            f"duration_s       {self.duration_s:.1f}",
        ]
        if self.lag_s:
            lines.append(f"lag_s            {self.lag_s:+.1f}")
        return "\n".join(lines) + "\n"


def _compare_at_lag(est: HrTrace, truth: HrTrace, lag: float):
    """Grid both traces over their overlap with est shifted by lag."""
    et = est.t + lag
    start = max(et[0], truth.t[0])
    end = min(et[-1], truth.t[-1])
    if end - start < MIN_OVERLAP_S:
        raise InsufficientOverlap(
            f"overlap {max(end - start, 0):.1f}s is under {MIN_OVERLAP_S:.0f}s"
        )
    n = int(math.floor((end - start) * GRID_HZ + 1e-9)) + 1
    grid = start + np.arange(n) / GRID_HZ
    ev = np.interp(grid, et, est.bpm)
    tv = np.interp(grid, truth.t, truth.bpm)
    # exclusion follows the nearest estimate sample's confidence flag
    nearest = np.clip(np.searchsorted(et, grid), 1, len(et) - 1)
    nearest -= (grid - et[nearest - 1]) < (et[nearest] - grid)
    keep = est.confidence[nearest] > 0.0
    return ev[keep], tv[keep], int((~keep).sum()), end - start


def align_and_compare(est: HrTrace, truth: HrTrace,
                      max_lag: bool = False) -> ValidationReport:
    """Resample both traces onto a common 1 Hz grid and score the agreement.

    Zero-confidence estimate samples are excluded and counted. With max_lag,
    the estimate may shift up to +-2 s to maximize r (off by default; honest
    reporting should not hide a systematic delay unless asked to).
    """
    lags = [0.0]
    if max_lag:
        k = int(round(MAX_LAG_S / _LAG_STEP_S))
        lags = [i * _LAG_STEP_S for i in range(-k, k + 1)]
    best = None
    for lag in lags:
        try:
            ev, tv, dropped, dur = _compare_at_lag(est, truth, lag)
        except InsufficientOverlap:
            if lag == 0.0:
                raise
            continue  # shifted overlap fell under the floor, skip this lag
        if len(ev) < 2:
            r = None
        else:
            try:
                r = pearson(ev, tv)
            except UndefinedCorrelation:
                r = None
        if best is None or (r is not None and (best[0] is None or r > best[0])):
            best = (r, ev, tv, dropped, dur, lag)
    r, ev, tv, dropped, dur, lag = best
    if len(ev) == 0:
        raise InsufficientData("every overlapping sample was excluded")
    err = ev - tv
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    assert rmse >= mae - 1e-12, "power mean inversion, arithmetic is broken"
    return ValidationReport(
        pearson_r=r,
        rmse_bpm=rmse,
        mean_abs_err_bpm=mae,
        n_samples=int(len(ev)),
        n_excluded=dropped,
        duration_s=float(dur),
        lag_s=lag,
    )


def read_beats_csv(path) -> RrSeries:
    """Read beat_t_ms rows."""
    beats = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["beat_t_ms"]:
            raise ParseError("bad beats header, want beat_t_ms", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                beats.append(int(row[0]))
            except ValueError:
                raise ParseError(f"bad beat row {row!r}", line=lineno, path=path) from None
    if len(beats) < 2:
        raise ParseError("need at least 2 beats", path=path)
    try:
        return RrSeries(np.asarray(beats, dtype=float) / 1000.0)
    except ConfigError as e:
        raise ParseError(str(e), path=path) from None


def write_beats_csv(path, rr: RrSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beat_t_ms"])
        for b in rr.beats:
            w.writerow([round(b * 1000)])
