from __future__ import annotations

import math

import numpy as np
import pytest

from pulseboard.errors import ConfigError
from pulseboard.trace import Trace
from pulseboard.wavelet import (
    OMEGA0,
    CardiacBand,
    morlet_cwt,
    morlet_kernel,
    scale_for_freq,
    scales_for_band,
)

from oracles import direct_cwt_column


def test_band_defaults_and_validation():
    b = CardiacBand()
    assert abs(b.f_min - 40 / 60) < 1e-15
    assert abs(b.f_max - 200 / 60) < 1e-15
    with pytest.raises(ConfigError):
        CardiacBand(2.0, 1.0)
    with pytest.raises(ConfigError):
        CardiacBand(0.0, 1.0)


def test_scale_frequency_map():
    # 1 Hz -> s = 6 / (2 pi) ~ 0.95493
    assert abs(scale_for_freq(1.0) - 0.954929658551372) < 1e-12


def test_scales_for_band_endpoints_and_spacing():
    freqs, scales = scales_for_band(30.0, CardiacBand(), 64)
    assert freqs[0] == CardiacBand().f_min
    assert freqs[-1] == CardiacBand().f_max
    ratios = freqs[1:] / freqs[:-1]
    assert np.max(np.abs(ratios - ratios[0])) < 1e-9  # log spaced
    assert np.allclose(scales, OMEGA0 / (2 * np.pi * freqs))
    f2, s2 = scales_for_band(30.0, CardiacBand(), 2)
    assert list(f2) == [CardiacBand().f_min, CardiacBand().f_max]
    with pytest.raises(ConfigError):
        scales_for_band(30.0, CardiacBand(), 1)
    with pytest.raises(ConfigError):
        scales_for_band(5.0, CardiacBand(1.0, 3.0), 8)  # band over nyquist


def test_kernel_shape_and_energy():
    fs = 30.0
    for f in (0.7, 1.2, 3.3):
        s = scale_for_freq(f)
        k = morlet_kernel(s, fs)
        L = int(math.ceil(6.0 * s * fs))
        assert len(k) == 2 * L + 1
        # conj(psi)(-t) = psi(t): convolution equals correlation
        assert np.allclose(k[::-1], np.conj(k), atol=1e-18)
        # unit-energy normalization: sum |k|^2 ~ dt
        assert abs(np.sum(np.abs(k) ** 2) * fs - 1.0) < 1e-3


def test_fft_path_matches_direct_convolution():
    # oracle: O(n*m) time-domain convolution built from the formula
    fs = 30.0
    n = 512
    rng = np.random.default_rng(2024)
    t = np.arange(n) / fs
    signals = [
        rng.normal(0, 1, n),
        np.sin(2 * np.pi * 1.2 * t) + 0.3 * rng.normal(0, 1, n),
    ]
    freqs, scales = scales_for_band(fs, CardiacBand(), 16)
    for x in signals:
        scal = morlet_cwt(Trace(t, x), scales)
        for i, f in enumerate(freqs):
            ref = direct_cwt_column(x, fs, scale_for_freq(f))
            got = scal.power[:, i]
            err = np.max(np.abs(got - np.abs(ref) ** 2))
            assert err <= 1e-6 * max(np.max(np.abs(ref) ** 2), 1e-30)


def test_zero_trace_zero_power():
    t = np.arange(256) / 30.0
    _, scales = scales_for_band(30.0, CardiacBand(), 8)
    scal = morlet_cwt(Trace(t, np.zeros(256)), scales)
    assert np.all(scal.power == 0.0)


def test_power_nonnegative():
    rng = np.random.default_rng(9)
    t = np.arange(300) / 30.0
    _, scales = scales_for_band(30.0, CardiacBand(), 12)
    scal = morlet_cwt(Trace(t, rng.normal(0, 1, 300)), scales)
    assert np.all(scal.power >= 0.0)


def test_coi_flags_match_formula():
    t = np.arange(400) / 30.0
    _, scales = scales_for_band(30.0, CardiacBand(), 12)
    scal = morlet_cwt(Trace(t, np.sin(2 * np.pi * t)), scales)
    edge = np.minimum(t - t[0], t[-1] - t)
    want = edge[:, None] < math.sqrt(2.0) * scal.scales[None, :]
    assert np.array_equal(scal.in_coi, want)
    assert scal.in_coi[0].all() and scal.in_coi[-1].all()
    # interior far from both edges is clean at every scale
    mid = len(t) // 2
    assert not scal.in_coi[mid].any()


def test_tone_ridge_lands_on_grid():
    fs = 30.0
    t = np.arange(int(60 * fs)) / fs
    freqs, scales = scales_for_band(fs, CardiacBand(), 64)
    for f0 in (0.8, 1.2, 2.5):
        scal = morlet_cwt(Trace(t, np.sin(2 * np.pi * f0 * t)), scales)
        comp = scal.power / scal.scales[None, :]
        mid = np.argmax(comp[len(t) // 2])
        step = freqs[1] / freqs[0]
        assert freqs[mid] / f0 < step and f0 / freqs[mid] < step


def test_cwt_requires_uniform():
    t = np.array([0.0, 0.03, 0.09, 0.2])
    with pytest.raises(ConfigError, match="uniform"):
        morlet_cwt(Trace(t, np.zeros(4)), [0.9])
