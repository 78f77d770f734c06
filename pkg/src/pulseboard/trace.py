"""Scalar time series with conditioning steps ahead of spectral analysis."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError

# relative slack when checking a grid for uniformity
_GRID_RTOL = 1e-6


@dataclass(frozen=True)
class Trace:
    """Timestamped samples (seconds, arbitrary units) plus the nominal rate."""

    t: np.ndarray
    v: np.ndarray
    nominal_fs: float = 30.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        if t.ndim != 1 or v.ndim != 1 or len(t) != len(v):
            raise ConfigError("trace arrays must be 1-d and equally long")
        if len(t) == 0:
            raise ConfigError("empty trace")
        if self.nominal_fs <= 0:
            raise ConfigError(f"nominal_fs must be positive, got {self.nominal_fs}")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            bad = int(np.flatnonzero(np.diff(t) <= 0)[0])
            raise ConfigError(
                f"timestamps not strictly increasing at index {bad + 1}"
            )

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def is_uniform(self) -> bool:
        if len(self.t) < 2:
            return True
        dt = (self.t[-1] - self.t[0]) / (len(self.t) - 1)
        return bool(np.max(np.abs(np.diff(self.t) - dt)) <= _GRID_RTOL * dt)


def resample_uniform(trace: Trace, fs: float) -> Trace:
    """Linear interpolation onto the grid t0, t0 + 1/fs, ... <= t_end."""
    if fs <= 0:
        raise ConfigError(f"fs must be positive, got {fs}")
    t0 = float(trace.t[0])
    span = float(trace.t[-1]) - t0
    n = int(np.floor(span * fs + 1e-9)) + 1
    grid = t0 + np.arange(n) / fs
    return Trace(grid, np.interp(grid, trace.t, trace.v), nominal_fs=fs)


def detrend(trace: Trace, window: float = 2.0) -> Trace:
    """Subtract the centered moving average over `window` seconds.

    Edges use the truncated available window. The default keeps the averager's
    first null at 0.5 Hz, under the cardiac band, so pulse content survives
    while slow illumination drift is removed.
    """
    if not trace.is_uniform():
        raise ConfigError("detrend needs a uniform trace; resample first")
    fs = trace.nominal_fs
    half = int(round(window * fs / 2))
    if 2 * half + 1 < 3:
        raise ConfigError(
            f"window {window}s is shorter than 3 samples at {fs} Hz"
        )
    n = len(trace.v)
    # center first so the running sums stay small; a constant trace then
    # cancels exactly instead of leaving cumsum rounding dust
    base = float(np.mean(trace.v))
    c = np.concatenate(([0.0], np.cumsum(trace.v - base)))
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    means = base + (c[hi] - c[lo]) / (hi - lo)
    return Trace(trace.t, trace.v - means, nominal_fs=fs)


def read_trace_csv(path) -> Trace:
    """Read t_ms,value rows. Timestamps come back in seconds."""
    t_ms, v = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t_ms", "value"]:
            raise ParseError("bad trace header, want t_ms,value", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t_ms.append(int(row[0]))
                v.append(float(row[1]))
            except (ValueError, IndexError):
                raise ParseError(f"bad trace row {row!r}", line=lineno, path=path) from None
    if not t_ms:
        raise ParseError("trace has no samples", path=path)
    t = np.asarray(t_ms, dtype=float) / 1000.0
    if np.any(np.diff(t) <= 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 2
        raise ParseError("timestamps not strictly increasing", line=bad + 1, path=path)
    return Trace(t, np.asarray(v))


def write_trace_csv(path, trace: Trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ms", "value"])
        for t, v in zip(trace.t, trace.v):
            w.writerow([round(t * 1000), f"{v:.6f}"])
