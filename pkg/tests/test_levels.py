import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from upitsep.dsp import Waveform
from upitsep.levels import (
    NoActiveSpeechError,
    SignalTooShortError,
    active_speech_level,
)

FS = 8000


def _speech_like(seed=0, seconds=4.0, fs=FS):
    # Modulated noise with pauses: enough envelope dynamics to exercise the
    # activity detector without needing a real corpus.
    rng = np.random.default_rng(seed)
    n = int(seconds * fs)
    t = np.arange(n) / fs
    envelope = np.clip(np.sin(2 * np.pi * 2.5 * t) + 0.2, 0.0, None)
    x = rng.standard_normal(n) * envelope * 0.2
    return Waveform(x, fs)


def test_full_scale_square_wave_measures_its_rms():
    # Continuously active signal: active level equals overall RMS.
    n = 4 * FS
    x = np.where(np.arange(n) % 16 < 8, 1.0, -1.0)
    w = Waveform(x, FS)
    rms_db = 10 * np.log10(np.mean(x**2))
    assert abs(active_speech_level(w) - rms_db) < 0.1


def test_half_duty_burst_measures_burst_rms():
    # 5 s of modulated noise followed by 5 s of silence: the active level
    # tracks the burst RMS, not the whole-file RMS (3 dB lower).
    rng = np.random.default_rng(42)
    fs = FS
    n_active = 5 * fs
    t = np.arange(n_active) / fs
    burst = rng.standard_normal(n_active) * 0.3 * (1.0 + 0.5 * np.sin(2 * np.pi * 4 * t))
    x = np.concatenate([burst, np.zeros(5 * fs)])
    burst_rms_db = 10 * np.log10(np.mean(burst**2))
    measured = active_speech_level(Waveform(x, fs))
    assert abs(measured - burst_rms_db) < 0.5


def test_scale_equivariance_fixed_gain():
    w = _speech_like(1)
    g = 0.123
    level = active_speech_level(w)
    scaled = active_speech_level(Waveform(w.samples * g, FS))
    assert abs(scaled - (level + 20 * np.log10(g))) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(-6, 6), st.integers(0, 2**31 - 1))
def test_scale_equivariance_power_of_two(exponent, seed):
    # Power-of-two gains scale every float exactly, so equivariance is exact.
    w = _speech_like(seed, seconds=1.5)
    g = 2.0**exponent
    level = active_speech_level(w)
    scaled = active_speech_level(Waveform(w.samples * g, FS))
    assert abs(scaled - (level + 20 * np.log10(g))) < 1e-9


def test_zero_signal_raises_distinct_error():
    with pytest.raises(NoActiveSpeechError):
        active_speech_level(Waveform(np.zeros(FS), FS))


def test_too_short_raises():
    with pytest.raises(SignalTooShortError):
        active_speech_level(Waveform(np.ones(100), FS))


def test_active_level_sits_above_long_term_rms_for_sparse_speech():
    # With long pauses the active level must exceed the whole-file RMS.
    w = _speech_like(7, seconds=6.0)
    x = np.concatenate([w.samples, np.zeros(6 * FS)])
    level = active_speech_level(Waveform(x, FS))
    rms_db = 10 * np.log10(np.mean(x**2))
    assert level > rms_db + 1.0
