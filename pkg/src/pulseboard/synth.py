"""Synthetic pulse signals with known instantaneous rate.

The generator integrates a time-varying rate f(t) = (base + mod*sin(2*pi*fm*t))/60
in closed form, so the ground truth is exact rather than numerically integrated:

    phi(t) = (base/60) t + (mod/60) (1 - cos(2 pi fm t)) / (2 pi fm)

and the observed signal is sin(2 pi phi) plus optional baseline drift and white
Gaussian noise from a seeded generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .estimator import HrTrace
from .trace import Trace


@dataclass(frozen=True)
class SynthSpec:
    duration: float = 60.0
    fs: float = 30.0
    base_bpm: float = 72.0
    modulation_bpm: float = 0.0
    modulation_freq: float = 0.1
    noise_sigma: float = 0.0
    drift_amp: float = 0.0
    drift_freq: float = 0.05
    seed: int = 0

    def __post_init__(self):
        lo = self.base_bpm - abs(self.modulation_bpm)
        hi = self.base_bpm + abs(self.modulation_bpm)
        if not (40.0 <= lo and hi <= 200.0):
            raise ConfigError(
                f"rate swings over [{lo:g}, {hi:g}] BPM, must stay in [40, 200]"
            )
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.fs < 4 * hi / 60.0:
            raise ConfigError(
                f"fs {self.fs} Hz is under twice Nyquist for {hi:g} BPM"
            )
        if self.modulation_bpm != 0 and self.modulation_freq <= 0:
            raise ConfigError("modulation_freq must be positive when modulating")


def noise_sigma_for_snr_db(snr_db: float) -> float:
    """Sigma of white noise giving the requested SNR against a unit sine."""
    return math.sqrt(0.5 / 10 ** (snr_db / 10.0))


def synth_ppg(spec: SynthSpec) -> tuple[Trace, HrTrace]:
    """Generate the observed trace and its ground-truth rate, same grid.

    Deterministic for a given spec, including the seed.
    """
    n = int(round(spec.duration * spec.fs))
    t = np.arange(n) / spec.fs
    base = spec.base_bpm / 60.0
    if spec.modulation_bpm != 0:
        fm = spec.modulation_freq
        phi = base * t + (spec.modulation_bpm / 60.0) * (
            1.0 - np.cos(2 * np.pi * fm * t)
        ) / (2 * np.pi * fm)
        bpm = spec.base_bpm + spec.modulation_bpm * np.sin(2 * np.pi * fm * t)
    else:
        phi = base * t
        bpm = np.full(n, spec.base_bpm)
    v = np.sin(2 * np.pi * phi)
    if spec.drift_amp != 0:
        v = v + spec.drift_amp * np.sin(2 * np.pi * spec.drift_freq * t)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        v = v + rng.normal(0.0, spec.noise_sigma, n)
    truth = HrTrace(t, bpm, np.ones(n))
    return Trace(t, v, nominal_fs=spec.fs), truth
