"""Continuous wavelet transform with an analytic Morlet, tuned for pulse rates.

The mother wavelet is

    psi(t) = pi**(-1/4) * exp(i * omega0 * t) * exp(-t**2 / 2),   omega0 = 6

and a scale s maps to center frequency f = omega0 / (2 pi s). Coefficients are
computed as the L2-normalized correlation

    W(s, b) = dt * sum_n x[n] * (1/sqrt(s)) * conj(psi)((t_n - b) / s)

which, because conj(psi)(-t) = psi(t), is the linear convolution of x with the
sampled kernel (dt/sqrt(s)) * psi(t/s). Each scale's kernel is truncated at
+-6 s where the Gaussian envelope is ~1.5e-8, and the convolutions run as one
FFT of the signal against precomputed kernel spectra.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError
from .trace import Trace

OMEGA0 = 6.0

# kernel support, in units of scale; exp(-6**2/2) ~ 1.5e-8
_TRUNC = 6.0


@dataclass(frozen=True)
class CardiacBand:
    """Analysis band in Hz. Defaults cover 40 to 200 BPM."""

    f_min: float = 40.0 / 60.0
    f_max: float = 200.0 / 60.0

    def __post_init__(self):
        if not (0 < self.f_min < self.f_max):
            raise ConfigError(
                f"need 0 < f_min < f_max, got [{self.f_min}, {self.f_max}]"
            )

    @property
    def mid_bpm(self) -> float:
        return 30.0 * (self.f_min + self.f_max)


DEFAULT_BAND = CardiacBand()


def scale_for_freq(f: float) -> float:
    return OMEGA0 / (2 * math.pi * f)


def freq_for_scale(s):
    return OMEGA0 / (2 * np.pi * np.asarray(s))


def scales_for_band(fs: float, band: CardiacBand = DEFAULT_BAND,
                    n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced center frequencies spanning the band, with their scales.

    Returns (freqs, scales); freqs ascend from f_min to f_max inclusive, so
    scales descend. n = 2 degenerates to exactly the endpoints; 8 or more is
    the sensible operating range.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 scales, got {n}")
    if band.f_max > fs / 2:
        raise ConfigError(
            f"band top {band.f_max:g} Hz exceeds Nyquist for fs={fs:g}"
        )
    freqs = np.geomspace(band.f_min, band.f_max, n)
    # endpoints exact despite log-space rounding
    freqs[0], freqs[-1] = band.f_min, band.f_max
    return freqs, OMEGA0 / (2 * np.pi * freqs)


def morlet_kernel(scale: float, fs: float) -> np.ndarray:
    """Sampled convolution kernel for one scale: (dt/sqrt(s)) * psi(j*dt/s).

    Odd length 2L+1 with L = ceil(_TRUNC * scale * fs), centered at index L.
    """
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    L = int(math.ceil(_TRUNC * scale * fs))
    tau = np.arange(-L, L + 1) / (scale * fs)
    psi = math.pi ** -0.25 * np.exp(1j * OMEGA0 * tau) * np.exp(-0.5 * tau * tau)
    return psi / (fs * math.sqrt(scale))


@dataclass(frozen=True)
class Scalogram:
    """Squared CWT magnitude on a time x frequency grid.

    freqs ascend; power[m, i] pairs times[m] with freqs[i]. in_coi flags
    samples closer to an edge than sqrt(2) * scale, where the truncated
    kernel hangs off the data and magnitudes are untrustworthy.
    """

    times: np.ndarray
    freqs: np.ndarray
    scales: np.ndarray
    power: np.ndarray
    in_coi: np.ndarray


class CwtPlan:
    """Precomputed kernel spectra for a fixed (n_samples, fs, scales) shape.

    Reused across the sliding windows of a stream, where the window length
    never changes; one forward FFT per window plus one inverse per scale.
    """

    def __init__(self, n: int, fs: float, scales) -> None:
        if n < 2:
            raise ConfigError(f"need at least 2 samples, got {n}")
        scales = np.asarray(scales, dtype=float)
        if scales.ndim != 1 or len(scales) == 0 or np.any(scales <= 0):
            raise ConfigError("scales must be a 1-d positive array")
        self.n = n
        self.fs = fs
        order = np.argsort(-scales)  # ascending frequency
        self.scales = scales[order]
        self.freqs = freq_for_scale(self.scales)
        self.halfwidths = [int(math.ceil(_TRUNC * s * fs)) for s in self.scales]
        self.nfft = sfft.next_fast_len(n + 2 * max(self.halfwidths))
        self.kernel_ffts = [
            sfft.fft(morlet_kernel(s, fs), self.nfft) for s in self.scales
        ]

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Complex coefficients, shape (n, n_scales), scale order = self.scales."""
        if len(x) != self.n:
            raise ConfigError(f"planned for {self.n} samples, got {len(x)}")
        X = sfft.fft(np.asarray(x, dtype=float), self.nfft)
        out = np.empty((self.n, len(self.scales)), dtype=complex)
        for i, (L, kf) in enumerate(zip(self.halfwidths, self.kernel_ffts)):
            full = sfft.ifft(X * kf)
            out[:, i] = full[L : L + self.n]
        return out

    def coi_mask(self, times: np.ndarray) -> np.ndarray:
        edge = np.minimum(times - times[0], times[-1] - times)
        return edge[:, None] < math.sqrt(2.0) * self.scales[None, :]


def morlet_cwt(trace: Trace, scales) -> Scalogram:
    """Transform a uniform trace at the given scales.

    A zero trace yields zero power everywhere. Power is |W|^2 and never
    negative.
    """
    if not trace.is_uniform():
        raise ConfigError("cwt needs a uniform trace; resample first")
    plan = CwtPlan(len(trace.v), trace.nominal_fs, scales)
    w = plan.transform(trace.v)
    power = np.abs(w) ** 2
    return Scalogram(
        times=trace.t,
        freqs=plan.freqs,
        scales=plan.scales,
        power=power,
        in_coi=plan.coi_mask(trace.t),
    )
