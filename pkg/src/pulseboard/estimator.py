"""Instantaneous heart rate from a conditioned trace.

Two independent estimators share one emission convention:

* the primary path ridges a Morlet scalogram (argmax over scale-compensated
  power per column, median-smoothed over 2 s);
* a windowed-periodogram baseline with parabolic peak interpolation serves as
  a cross-check that shares no spectral code with the wavelet path.

Sliding windows emit one sample per hop. The emitted column sits
sqrt(2) * s_max behind the window's trailing edge: at the edge itself every
scale is inside the cone of influence and the confidence rule would zero
every sample, so the freshest trustworthy column is that backoff in.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientData, ParseError, TimeRegression
from .trace import Trace, detrend, resample_uniform
from .wavelet import (
    DEFAULT_BAND,
    CardiacBand,
    CwtPlan,
    Scalogram,
    scale_for_freq,
    scales_for_band,
)

BPM_FLOOR = 40.0
BPM_CEIL = 200.0
_BPM_TOL = 1e-6

# below this, a sample counts as low-confidence in summaries
LOW_CONFIDENCE = 0.2

_MEDIAN_SPAN_S = 2.0


@dataclass(frozen=True)
class HrTrace:
    """Rate samples in BPM with per-sample confidence in [0, 1]."""

    t: np.ndarray
    bpm: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        bpm = np.asarray(self.bpm, dtype=float)
        conf = np.asarray(self.confidence, dtype=float)
        for name, a in (("t", t), ("bpm", bpm), ("confidence", conf)):
            if a.ndim != 1 or len(a) != len(t):
                raise ConfigError(f"{name} must be 1-d and match t")
        if len(t) == 0:
            raise ConfigError("empty hr trace")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ConfigError("hr timestamps not strictly increasing")
        if np.any(bpm < BPM_FLOOR - _BPM_TOL) or np.any(bpm > BPM_CEIL + _BPM_TOL):
            raise ConfigError("bpm outside [40, 200]")
        if np.any(conf < -1e-9) or np.any(conf > 1 + 1e-9):
            raise ConfigError("confidence outside [0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "bpm", bpm)
        object.__setattr__(self, "confidence", np.clip(conf, 0.0, 1.0))


@dataclass(frozen=True)
class BeatPhase:
    """Beat-cycle position in [0, 1) as of a moment in time."""

    phase: float
    as_of: float

    def __post_init__(self):
        if not (0.0 <= self.phase < 1.0):
            raise ConfigError(f"phase {self.phase} outside [0, 1)")


@dataclass(frozen=True)
class EstimatorConfig:
    fs: float = 30.0
    band: CardiacBand = field(default_factory=CardiacBand)
    n_scales: int = 64
    window_s: float = 20.0
    hop_s: float = 1.0
    detrend_window_s: float = 2.0

    def __post_init__(self):
        if self.fs <= 0:
            raise ConfigError("fs must be positive")
        if self.window_s < 10.0:
            raise ConfigError(f"window {self.window_s}s is under the 10 s minimum")
        if self.hop_s <= 0:
            raise ConfigError("hop must be positive")

    @property
    def emit_backoff_s(self) -> float:
        """Distance from window end to the emitted column; the COI half-width
        of the largest analyzed scale."""
        n = math.ceil(math.sqrt(2.0) * scale_for_freq(self.band.f_min) * self.fs)
        return n / self.fs


DEFAULT_CONFIG = EstimatorConfig()


def _tone_share(freqs: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Peak share of scale-compensated column power for a tone at freqs[i].

    The compensated power of a pure tone at f falls off across scale as
    exp(-(2 pi f s - omega0)^2); the peak cell's share of that profile is
    the best concentration any real signal can reach, so it anchors the top
    of the confidence scale.
    """
    from .wavelet import OMEGA0

    arg = 2 * np.pi * freqs[:, None] * scales[None, :] - OMEGA0
    prof = np.exp(-(arg * arg))
    return prof.max(axis=1) / prof.sum(axis=1)


def _truncated_median(x: np.ndarray, half: int) -> np.ndarray:
    """Centered running median; edge windows shrink to what is available."""
    n = len(x)
    w = 2 * half + 1
    if half < 1 or n <= w:
        return np.array([np.median(x[max(0, i - half) : i + half + 1]) for i in range(n)])
    out = np.empty(n)
    view = np.lib.stride_tricks.sliding_window_view(x, w)
    out[half : n - half] = np.median(view, axis=1)
    for i in range(half):
        out[i] = np.median(x[: i + half + 1])
        out[n - 1 - i] = np.median(x[n - 1 - i - half :])
    return out


def extract_ridge(scal: Scalogram) -> HrTrace:
    """Follow the dominant frequency across a scalogram.

    The argmax runs over power divided by scale: the L2-normalized response
    to a pure tone peaks one step low, and the 1/s reweighting centers it on
    the true frequency. Zero-power columns carry the previous rate (band
    midpoint when there is none yet) at confidence 0. Confidence is the
    column's peak share of total power, rescaled to [0, 1] so a flat column
    scores 0 and a pure tone's concentration scores 1, then damped by the
    fraction of scales inside the cone of influence.
    """
    power = scal.power
    n, n_scales = power.shape
    comp = power / scal.scales[None, :]
    totals = comp.sum(axis=1)
    live = totals > 0.0

    bpm_grid = 60.0 * scal.freqs
    raw = np.empty(n)
    idx = np.argmax(comp, axis=1)
    raw[live] = bpm_grid[idx[live]]
    prev = 30.0 * (scal.freqs[0] + scal.freqs[-1])  # band midpoint in BPM
    for i in range(n):
        if not live[i]:
            raw[i] = raw[i - 1] if i > 0 else prev

    fs_col = 1.0 / float(scal.times[1] - scal.times[0]) if n > 1 else 1.0
    half = int(round(_MEDIAN_SPAN_S * fs_col / 2))
    bpm = _truncated_median(raw, half) if half >= 1 else raw

    peak_share = np.zeros(n)
    peak_share[live] = comp[live].max(axis=1) / totals[live]
    flat = 1.0 / n_scales
    best = _tone_share(scal.freqs, scal.scales)[idx]
    conf = np.clip((peak_share - flat) / (best - flat), 0.0, 1.0)
    conf *= 1.0 - scal.in_coi.mean(axis=1)
    conf[~live] = 0.0
    return HrTrace(scal.times, np.clip(bpm, BPM_FLOOR, BPM_CEIL), conf)


def _window_starts(n: int, win_n: int, hop_n: int) -> range:
    return range(0, n - win_n + 1, hop_n)


def estimate_hr(trace: Trace, config: EstimatorConfig = DEFAULT_CONFIG) -> HrTrace:
    """Sliding-window rate estimation over a whole trace.

    Resamples, detrends, then transforms each window and keeps the ridge
    sample at the emission column. Output cadence equals the hop. A trace
    shorter than one window (but at least 10 s) produces a single sample
    from one truncated window.
    """
    if trace.duration < 10.0:
        raise InsufficientData(
            f"trace spans {trace.duration:.2f}s, need at least 10s"
        )
    u = detrend(resample_uniform(trace, config.fs), config.detrend_window_s)
    _, scales = scales_for_band(config.fs, config.band, config.n_scales)
    win_n = int(round(config.window_s * config.fs))
    hop_n = max(1, int(round(config.hop_s * config.fs)))
    backoff_n = int(round(config.emit_backoff_s * config.fs))
    n = len(u.v)
    if n < win_n:
        win_n = n
    starts = _window_starts(n, win_n, hop_n)
    plan = CwtPlan(win_n, config.fs, scales)
    emit = max(0, win_n - 1 - backoff_n)
    ts, bpms, confs = [], [], []
    for s0 in starts:
        seg_t = u.t[s0 : s0 + win_n]
        w = plan.transform(u.v[s0 : s0 + win_n])
        power = np.abs(w) ** 2
        scal = Scalogram(seg_t, plan.freqs, plan.scales, power,
                         plan.coi_mask(seg_t))
        ridge = extract_ridge(scal)
        ts.append(ridge.t[emit])
        bpms.append(ridge.bpm[emit])
        confs.append(ridge.confidence[emit])
    return HrTrace(np.array(ts), np.array(bpms), np.array(confs))


def fft_hr_baseline(trace: Trace, config: EstimatorConfig = DEFAULT_CONFIG) -> HrTrace:
    """Independent periodogram estimator on the same window/emission grid.

    Each window is demeaned, Hann-tapered, zero-padded 4x, and the in-band
    peak is refined with three-point parabolic interpolation on log power.
    No wavelet code is involved.
    """
    if trace.duration < 10.0:
        raise InsufficientData(
            f"trace spans {trace.duration:.2f}s, need at least 10s"
        )
    u = resample_uniform(trace, config.fs)
    win_n = int(round(config.window_s * config.fs))
    hop_n = max(1, int(round(config.hop_s * config.fs)))
    backoff_n = int(round(config.emit_backoff_s * config.fs))
    n = len(u.v)
    if n < win_n:
        win_n = n
    taper = np.hanning(win_n)
    nfft = 4 * win_n
    freqs = np.fft.rfftfreq(nfft, 1.0 / config.fs)
    band = (freqs >= config.band.f_min) & (freqs <= config.band.f_max)
    if not band.any():
        raise ConfigError("analysis band holds no fft bins at this window size")
    band_idx = np.flatnonzero(band)
    emit_off = max(0, win_n - 1 - backoff_n)
    # a coherent mid-band tone's peak-bin share anchors confidence 1
    mid = 0.5 * (config.band.f_min + config.band.f_max)
    tone = np.sin(2 * np.pi * mid * np.arange(win_n) / config.fs) * taper
    ref = np.abs(np.fft.rfft(tone, nfft))[band_idx] ** 2
    best_share = ref.max() / ref.sum()
    ts, bpms, confs = [], [], []
    for s0 in _window_starts(n, win_n, hop_n):
        x = u.v[s0 : s0 + win_n]
        spec = np.abs(np.fft.rfft((x - x.mean()) * taper, nfft)) ** 2
        pb = spec[band_idx]
        total = pb.sum()
        if total <= 0.0:
            bpm = 30.0 * (config.band.f_min + config.band.f_max)
            conf = 0.0
        else:
            k = band_idx[int(np.argmax(pb))]
            f = freqs[k]
            if 0 < k < len(spec) - 1 and spec[k - 1] > 0 and spec[k + 1] > 0:
                la, lb, lc = np.log(spec[k - 1 : k + 2])
                denom = la - 2 * lb + lc
                if denom < 0:
                    delta = 0.5 * (la - lc) / denom
                    f = freqs[k] + np.clip(delta, -0.5, 0.5) * (freqs[1] - freqs[0])
            bpm = float(np.clip(60.0 * f, BPM_FLOOR, BPM_CEIL))
            flat = 1.0 / len(band_idx)
            conf = float(np.clip((pb.max() / total - flat) / (best_share - flat),
                                 0.0, 1.0))
        ts.append(u.t[s0 + emit_off])
        bpms.append(bpm)
        confs.append(conf)
    return HrTrace(np.array(ts), np.array(bpms), np.array(confs))


def advance_phase(phase: BeatPhase, hr: HrTrace, now: float) -> BeatPhase:
    """Integrate rate over [as_of, now] and wrap into [0, 1).

    The rate curve is piecewise constant and left-continuous: sample i holds
    on [t_i, t_{i+1}), clamped flat outside the sampled range. Splitting the
    interval at any point composes exactly, so repeated small advances agree
    with one big one.
    """
    if now < phase.as_of:
        raise TimeRegression(f"now={now} precedes as_of={phase.as_of}")
    if now == phase.as_of:
        return phase
    t, b = hr.t, hr.bpm
    cuts = t[(t > phase.as_of) & (t < now)]
    pts = np.concatenate(([phase.as_of], cuts, [now]))
    beats = 0.0
    for a, z in zip(pts[:-1], pts[1:]):
        i = np.searchsorted(t, a, side="right") - 1
        beats += b[min(max(i, 0), len(b) - 1)] / 60.0 * (z - a)
    return BeatPhase((phase.phase + beats) % 1.0, now)


class StreamingEstimator:
    """Incremental front end for live streams.

    Raw samples accumulate in a rolling buffer; whenever the next hop's
    window is fully covered, that window is resampled on the global grid,
    detrended locally, transformed with a reused plan, and one sample comes
    out. Per-window detrending differs from the batch path only inside the
    averager half-window at the slice edges, which the emission backoff
    already avoids.
    """

    def __init__(self, config: EstimatorConfig = DEFAULT_CONFIG) -> None:
        self.config = config
        self._t: list[float] = []
        self._v: list[float] = []
        self._t0: float | None = None
        self._emitted = 0
        _, self._scales = scales_for_band(config.fs, config.band, config.n_scales)
        self._win_n = int(round(config.window_s * config.fs))
        self._hop_n = max(1, int(round(config.hop_s * config.fs)))
        self._backoff_n = int(round(config.emit_backoff_s * config.fs))
        self._plan = CwtPlan(self._win_n, config.fs, self._scales)

    def push(self, t: float, v: float) -> list[tuple[float, float, float]]:
        """Feed one sample; returns any (t, bpm, confidence) now computable."""
        if self._t and t <= self._t[-1]:
            raise TimeRegression(f"sample at {t} after one at {self._t[-1]}")
        if self._t0 is None:
            self._t0 = t
        self._t.append(t)
        self._v.append(v)
        out = []
        fs = self.config.fs
        while True:
            start_idx = self._emitted * self._hop_n
            end_time = self._t0 + (start_idx + self._win_n - 1) / fs
            if self._t[-1] < end_time:
                break
            grid = self._t0 + (start_idx + np.arange(self._win_n)) / fs
            seg = Trace(grid, np.interp(grid, self._t, self._v), nominal_fs=fs)
            seg = detrend(seg, self.config.detrend_window_s)
            w = self._plan.transform(seg.v)
            scal = Scalogram(seg.t, self._plan.freqs, self._plan.scales,
                             np.abs(w) ** 2, self._plan.coi_mask(seg.t))
            ridge = extract_ridge(scal)
            emit = max(0, self._win_n - 1 - self._backoff_n)
            out.append((float(ridge.t[emit]), float(ridge.bpm[emit]),
                        float(ridge.confidence[emit])))
            self._emitted += 1
            cutoff = self._t0 + (self._emitted * self._hop_n - 1) / fs
            drop = 0
            while drop < len(self._t) - 1 and self._t[drop + 1] < cutoff:
                drop += 1
            if drop:
                del self._t[:drop]
                del self._v[:drop]
        return out


def read_hr_csv(path) -> HrTrace:
    """Read t_ms,bpm,confidence rows."""
    t_ms, bpm, conf = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t_ms", "bpm", "confidence"]:
            raise ParseError("bad hr header, want t_ms,bpm,confidence", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t_ms.append(int(row[0]))
                bpm.append(float(row[1]))
                conf.append(float(row[2]))
            except (ValueError, IndexError):
                raise ParseError(f"bad hr row {row!r}", line=lineno, path=path) from None
    if not t_ms:
        raise ParseError("hr trace has no samples", path=path)
    try:
        return HrTrace(np.asarray(t_ms, dtype=float) / 1000.0,
                       np.asarray(bpm), np.asarray(conf))
    except ConfigError as e:
        raise ParseError(str(e), path=path) from None


def write_hr_csv(path, hr: HrTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ms", "bpm", "confidence"])
        for t, b, c in zip(hr.t, hr.bpm, hr.confidence):
            w.writerow([round(t * 1000), f"{b:.3f}", f"{c:.4f}"])
