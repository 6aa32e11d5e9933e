import numpy as np
import pytest

from upitsep.dsp import Waveform
from upitsep.levels import NoActiveSpeechError, active_speech_level
from upitsep.mixing import (
    NoiseTooShortError,
    SampleRateMismatchError,
    add_noise_at_snr,
    add_silent_speaker,
    mix_speakers,
)

FS = 8000


def _utterance(seed, seconds=2.0, amp=0.2):
    rng = np.random.default_rng(seed)
    n = int(seconds * FS)
    t = np.arange(n) / FS
    envelope = np.clip(np.sin(2 * np.pi * 3.0 * t + rng.uniform(0, np.pi)) + 0.3, 0.0, None)
    return Waveform(rng.standard_normal(n) * envelope * amp, FS)


def test_two_speaker_offset_is_exact():
    ex = mix_speakers([_utterance(0), _utterance(1, seconds=1.7)], [5.0])
    gap = active_speech_level(ex.sources[0]) - active_speech_level(ex.sources[1])
    assert abs(gap - 5.0) < 0.01
    assert ex.gains[0] == 1.0


def test_three_speaker_offsets_are_exact():
    utts = [_utterance(3), _utterance(4, seconds=2.4), _utterance(5, seconds=1.5)]
    ex = mix_speakers(utts, [2.0, 4.5])
    ref = active_speech_level(ex.sources[0])
    assert abs(ref - active_speech_level(ex.sources[1]) - 2.0) < 0.01
    assert abs(ref - active_speech_level(ex.sources[2]) - 4.5) < 0.01


def test_mixture_is_exact_sum_of_sources():
    ex = mix_speakers([_utterance(6), _utterance(7, seconds=2.6)], [1.0])
    total = ex.sources[0].samples + ex.sources[1].samples
    assert np.max(np.abs(ex.mixture.samples - total)) < 1e-12


def test_sources_padded_to_common_length():
    ex = mix_speakers([_utterance(8, seconds=1.2), _utterance(9, seconds=2.0)], [0.0])
    assert ex.num_samples == 2 * FS
    assert all(s.num_samples == ex.num_samples for s in ex.sources)
    # The shorter utterance is padded at the tail with exact zeros.
    assert np.all(ex.sources[0].samples[int(1.2 * FS) :] == 0)


def test_offset_and_count_validation():
    with pytest.raises(ValueError):
        mix_speakers([_utterance(0)], [])
    with pytest.raises(ValueError):
        mix_speakers([_utterance(0), _utterance(1)], [1.0, 2.0])
    with pytest.raises(ValueError):
        mix_speakers([_utterance(0), _utterance(1)], [-0.5])
    with pytest.raises(SampleRateMismatchError):
        mix_speakers(
            [_utterance(0), Waveform(_utterance(1).samples, 16000)], [0.0]
        )


def test_silent_utterance_raises():
    with pytest.raises(NoActiveSpeechError):
        mix_speakers([_utterance(0), Waveform(np.zeros(2 * FS), FS)], [0.0])


def test_silent_speaker_energy_gap():
    ex = mix_speakers([_utterance(10, seconds=5.0), _utterance(11, seconds=5.0)], [3.0])
    ex3 = add_silent_speaker(ex, seed=123)
    assert ex3.silent_speaker_present
    assert len(ex3.sources) == 3
    mean_ms = np.mean(
        [np.mean(ex3.sources[0].samples ** 2), np.mean(ex3.sources[1].samples ** 2)]
    )
    silent_ms = np.mean(ex3.sources[2].samples ** 2)
    # Enforced by construction.
    assert abs(silent_ms / mean_ms - 1e-7) < 0.01 * 1e-7
    # Re-measured empirically in dB.
    gap_db = 10 * np.log10(mean_ms / silent_ms)
    assert abs(gap_db - 70.0) < 0.05
    # Additivity still holds.
    total = sum(s.samples for s in ex3.sources)
    assert np.max(np.abs(ex3.mixture.samples - total)) < 1e-12


def test_silent_speaker_requires_two_sources():
    utts = [_utterance(1), _utterance(2), _utterance(3)]
    ex = mix_speakers(utts, [0.0, 0.0])
    with pytest.raises(ValueError):
        add_silent_speaker(ex, seed=0)


def test_silent_speaker_deterministic():
    ex = mix_speakers([_utterance(12), _utterance(13)], [2.0])
    a = add_silent_speaker(ex, seed=99).sources[2].samples
    b = add_silent_speaker(ex, seed=99).sources[2].samples
    assert np.array_equal(a, b)


def test_noise_gain_for_unit_power_noise_at_zero_dbov():
    # A mixture rescaled to exactly 0 dBov active level plus exactly
    # unit-power noise at 0 dB SNR leaves the noise unscaled.
    from dataclasses import replace

    base = mix_speakers([_utterance(30, seconds=3.0), _utterance(31, seconds=3.0)], [2.0])
    g = 10 ** (-active_speech_level(base.mixture) / 20)
    ex = replace(
        base,
        mixture=Waveform(base.mixture.samples * g, FS),
        sources=tuple(Waveform(s.samples * g, FS) for s in base.sources),
    )
    rng = np.random.default_rng(0)
    raw = rng.standard_normal(ex.num_samples + 100)
    raw /= np.sqrt(np.mean(raw[: ex.num_samples] ** 2))  # unit power over the slice
    noisy = add_noise_at_snr(ex, Waveform(raw, FS), snr_db=0.0, offset=0)
    assert abs(noisy.noise_gain - 1.0) < 1e-3


def test_snr_is_exact_after_scaling():
    ex = mix_speakers([_utterance(20), _utterance(21)], [2.5])
    rng = np.random.default_rng(5)
    noise = Waveform(rng.standard_normal(ex.num_samples + 500) * 0.7, FS)
    for snr in [-5.0, 0.0, 5.0, 20.0]:
        noisy = add_noise_at_snr(ex, noise, snr_db=snr, offset=250)
        clean_level = active_speech_level(ex.mixture)
        noise_level = 10 * np.log10(np.mean(noisy.noise.samples ** 2))
        assert abs((clean_level - noise_level) - snr) < 0.05
        total = sum(s.samples for s in noisy.sources) + noisy.noise.samples
        assert np.max(np.abs(noisy.mixture.samples - total)) < 1e-12


def test_noise_slice_uses_offset():
    ex = mix_speakers([_utterance(22), _utterance(23)], [0.0])
    rng = np.random.default_rng(6)
    noise = Waveform(rng.standard_normal(ex.num_samples * 3), FS)
    a = add_noise_at_snr(ex, noise, 5.0, offset=0)
    b = add_noise_at_snr(ex, noise, 5.0, offset=ex.num_samples)
    assert not np.allclose(a.noise.samples, b.noise.samples)
    # Equal up to scale with the underlying slice.
    slice_b = noise.samples[ex.num_samples : 2 * ex.num_samples]
    assert np.allclose(b.noise.samples, slice_b * b.noise_gain)


def test_noise_too_short_and_snr_sanity():
    ex = mix_speakers([_utterance(24), _utterance(25)], [0.0])
    noise = Waveform(np.random.default_rng(7).standard_normal(ex.num_samples // 2), FS)
    with pytest.raises(NoiseTooShortError):
        add_noise_at_snr(ex, noise, 0.0)
    long_noise = Waveform(np.random.default_rng(8).standard_normal(ex.num_samples * 2), FS)
    with pytest.raises(ValueError):
        add_noise_at_snr(ex, long_noise, -31.0)
    with pytest.raises(ValueError):
        add_noise_at_snr(ex, long_noise, 61.0)
