import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from upitsep.dsp import (
    DimensionMismatchError,
    MagnitudeSpectrogram,
    StftConfig,
    Waveform,
    apply_mask,
    frame_count,
    inverse_stft,
    magnitude,
    phase,
    stft,
    wrap_phase,
)

FS = 8000


def _noise(n, seed=0):
    return Waveform(np.random.default_rng(seed).standard_normal(n) * 0.1, FS)


def test_default_config_grid():
    cfg = StftConfig()
    assert cfg.fft_size == 256
    assert cfg.window_length == 256
    assert cfg.hop == 128
    assert cfg.num_bins == 129


def test_config_validation():
    with pytest.raises(ValueError):
        StftConfig(hop=0)
    with pytest.raises(ValueError):
        StftConfig(hop=512, window_length=256)
    with pytest.raises(ValueError):
        StftConfig(fft_size=128, window_length=256)
    with pytest.raises(ValueError):
        StftConfig(window="blackman")


def test_waveform_validation():
    with pytest.raises(ValueError):
        Waveform(np.array([[0.0, 1.0]]), FS)
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]), FS)
    with pytest.raises(ValueError):
        Waveform(np.zeros(4), 0)


def test_zero_waveform_yields_zero_spectrogram_with_covering_frame_count():
    # 1 s at 8 kHz: every sample covered, final frame zero-padded.
    w = Waveform(np.zeros(8000), FS)
    spec = stft(w)
    assert spec.num_frames == 8000 // 128 == 62
    assert spec.num_bins == 129
    assert np.all(spec.frames == 0)
    assert np.all(magnitude(spec).frames == 0)
    # Phase of exactly-zero bins is 0 by convention.
    assert np.all(phase(spec).frames == 0)


def test_frame_count_covers_every_sample():
    cfg = StftConfig()
    for n in [1, 100, 256, 257, 384, 385, 8000, 8001]:
        k = frame_count(n, cfg)
        assert (k - 1) * cfg.hop + cfg.window_length >= n
        if k > 1:
            assert (k - 2) * cfg.hop + cfg.window_length < n


def test_impulse_frame_is_flat_with_window_weight():
    # A unit impulse at sample 0 appears in frame 0 at window position 0:
    # flat magnitude equal to the window's first coefficient.
    x = np.zeros(1000)
    x[0] = 1.0
    spec = stft(Waveform(x, FS))
    mags = magnitude(spec).frames
    w0 = 0.5 - 0.5 * np.cos(2 * np.pi * 0.5 / 256)
    assert np.allclose(mags[0], w0, rtol=1e-12, atol=1e-15)
    assert np.all(mags[1:] == 0)


def test_bin_centered_sinusoid_energy_concentration():
    # Oracle: numerically computed DFT of one windowed frame of the same
    # sinusoid. 1000 Hz sits exactly on bin 32 (0-indexed) of the default
    # grid; the window's main lobe spans bins 31..33.
    n = 8000
    t = np.arange(n) / FS
    x = 0.5 * np.sin(2 * np.pi * 1000.0 * t)
    spec = stft(Waveform(x, FS))
    win = 0.5 - 0.5 * np.cos(2 * np.pi * (np.arange(256) + 0.5) / 256)
    oracle = np.abs(np.fft.rfft(win * x[128 * 10 : 128 * 10 + 256], n=256))
    oracle_energy = oracle**2
    center_share_oracle = oracle_energy[32] / oracle_energy.sum()
    lobe_share_oracle = oracle_energy[31:34].sum() / oracle_energy.sum()
    # The window concentrates 2/3 of the energy in the center bin and
    # essentially all of it in the 3-bin main lobe.
    assert abs(center_share_oracle - 2.0 / 3.0) < 1e-3
    assert lobe_share_oracle > 0.99
    energies = magnitude(spec).frames ** 2
    for i in range(5, spec.num_frames - 5):  # interior frames only
        total = energies[i].sum()
        assert abs(energies[i, 32] / total - center_share_oracle) < 1e-6
        assert energies[i, 31:34].sum() / total > 0.99


def test_round_trip_identity_mask():
    rng = np.random.default_rng(7)
    for n in [300, 8000, 8191, 12345]:
        w = Waveform(rng.standard_normal(n) * 0.1, FS)
        spec = stft(w)
        back = inverse_stft(magnitude(spec), phase(spec))
        assert back.num_samples == n
        err = np.linalg.norm(back.samples - w.samples) / np.linalg.norm(w.samples)
        assert err <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(257, 6000))
def test_round_trip_property(seed, n):
    w = _noise(n, seed)
    back = inverse_stft(magnitude(stft(w)), phase(stft(w)))
    err = np.linalg.norm(back.samples - w.samples) / np.linalg.norm(w.samples)
    assert err <= 1e-6


def test_linearity_of_analysis():
    rng = np.random.default_rng(3)
    a = rng.standard_normal(5000)
    b = rng.standard_normal(5000)
    alpha, beta = 0.7, -1.3
    sa = stft(Waveform(a, FS)).frames
    sb = stft(Waveform(b, FS)).frames
    sab = stft(Waveform(alpha * a + beta * b, FS)).frames
    assert np.allclose(sab, alpha * sa + beta * sb, rtol=1e-10, atol=1e-12)


def test_energy_accounting_matches_windowed_accumulation():
    # Per-frame Parseval: single-sided spectrogram energy (interior bins
    # doubled) over fft_size equals the total windowed sample energy.
    rng = np.random.default_rng(11)
    n = 5000
    x = rng.standard_normal(n)
    cfg = StftConfig()
    spec = stft(Waveform(x, FS), cfg)
    e = np.abs(spec.frames) ** 2
    weights = np.full(cfg.num_bins, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    spec_energy = float((e * weights).sum()) / cfg.fft_size
    win = 0.5 - 0.5 * np.cos(2 * np.pi * (np.arange(256) + 0.5) / 256)
    padded = np.zeros((spec.num_frames - 1) * cfg.hop + cfg.window_length)
    padded[:n] = x
    windowed_energy = sum(
        float(np.sum((padded[i * cfg.hop : i * cfg.hop + 256] * win) ** 2))
        for i in range(spec.num_frames)
    )
    assert abs(spec_energy - windowed_energy) / windowed_energy <= 1e-6


def test_phase_is_wrapped_to_half_open_interval():
    rng = np.random.default_rng(5)
    w = Waveform(rng.standard_normal(4000), FS)
    p = phase(stft(w)).frames
    assert np.all(p > -np.pi)
    assert np.all(p <= np.pi)


def test_wrap_phase_maps_pi_boundary_up():
    assert wrap_phase(np.array([-np.pi]))[0] == np.pi
    assert wrap_phase(np.array([3 * np.pi]))[0] == pytest.approx(np.pi)
    assert wrap_phase(np.array([0.5]))[0] == pytest.approx(0.5)


def test_apply_mask_scales_and_clamps():
    w = _noise(2000, 1)
    mag = magnitude(stft(w))
    half = apply_mask(np.full(mag.frames.shape, 0.5), mag)
    assert np.allclose(half.frames, 0.5 * mag.frames)
    neg = apply_mask(np.full(mag.frames.shape, -1.0), mag)
    assert np.all(neg.frames == 0)


def test_apply_mask_shape_mismatch():
    w = _noise(2000, 2)
    mag = magnitude(stft(w))
    with pytest.raises(DimensionMismatchError):
        apply_mask(np.ones((3, 3)), mag)


def test_inverse_rejects_mismatched_grids():
    w = _noise(2000, 3)
    spec = stft(w)
    other = stft(_noise(4000, 4))
    with pytest.raises(DimensionMismatchError):
        inverse_stft(magnitude(spec), phase(other))


def test_masked_resynthesis_uses_mixture_phase():
    # Scaling the magnitude by a constant mask scales the signal.
    w = _noise(4000, 9)
    spec = stft(w)
    scaled = inverse_stft(apply_mask(np.full(spec.frames.shape, 0.25), magnitude(spec)), phase(spec))
    assert np.allclose(scaled.samples, 0.25 * w.samples, atol=1e-8)


def test_empty_waveform_rejected():
    with pytest.raises(ValueError):
        stft(Waveform(np.zeros(0), FS))
