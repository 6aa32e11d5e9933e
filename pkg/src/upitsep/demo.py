"""Synthetic speech-like corpus for demos and desk-scale experiments.

Licensed speech corpora cannot ship with the toolkit, so end-to-end runs
use generated utterances instead: syllable trains of pitched pulse
excitation (voiced) or noise bursts (unvoiced) shaped by second-order
formant resonators, with per-speaker pitch and formant tendencies so that
speakers are acoustically distinguishable. The result is not speech, but
it has speech-like envelopes, spectra, and pauses, which is what the
level meter, the LPC noise fit, and the separation models care about.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from upitsep.dsp import Waveform

DEFAULT_SAMPLE_RATE = 8000


def _resonator(x: np.ndarray, center_hz: float, bandwidth_hz: float, fs: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth_hz / fs)
    theta = 2.0 * np.pi * center_hz / fs
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return lfilter([1.0 - r], a, x)


def speaker_profile(speaker_seed: int) -> dict:
    """Per-speaker voice tendencies, deterministic in the seed."""
    rng = np.random.default_rng(speaker_seed)
    low_voice = speaker_seed % 2 == 0
    pitch = rng.uniform(95.0, 145.0) if low_voice else rng.uniform(185.0, 265.0)
    return {
        "pitch_hz": float(pitch),
        "formants_hz": (
            float(rng.uniform(320.0, 760.0)),
            float(rng.uniform(980.0, 2100.0)),
            float(rng.uniform(2400.0, 3300.0)),
        ),
        "bandwidths_hz": (
            float(rng.uniform(60.0, 110.0)),
            float(rng.uniform(90.0, 160.0)),
            float(rng.uniform(140.0, 240.0)),
        ),
    }


def _syllable(rng: np.random.Generator, profile: dict, fs: int) -> np.ndarray:
    n = int(rng.uniform(0.12, 0.26) * fs)
    voiced = rng.random() < 0.75
    if voiced:
        pitch = profile["pitch_hz"] * rng.uniform(0.9, 1.1)
        period = max(2, int(round(fs / pitch)))
        excitation = np.zeros(n)
        phase_jitter = rng.uniform(0, period)
        positions = np.arange(phase_jitter, n, period).astype(int)
        excitation[positions[positions < n]] = 1.0
    else:
        excitation = rng.standard_normal(n) * 0.25
    y = np.zeros(n)
    for center, bw in zip(profile["formants_hz"], profile["bandwidths_hz"]):
        jitter = rng.uniform(0.92, 1.08)
        y += _resonator(excitation, center * jitter, bw, fs)
    if not voiced:
        y += _resonator(excitation, rng.uniform(2800.0, 3600.0), 400.0, fs) * 1.5
    # Attack/decay envelope.
    attack = max(1, int(0.25 * n))
    envelope = np.ones(n)
    envelope[:attack] = np.linspace(0.0, 1.0, attack)
    envelope[-attack:] *= np.linspace(1.0, 0.1, attack)
    return y * envelope * rng.uniform(0.6, 1.0)


def synth_utterance(
    speaker_seed: int,
    utterance_seed: int,
    duration_range_s: tuple[float, float] = (1.6, 2.6),
    fs: int = DEFAULT_SAMPLE_RATE,
) -> Waveform:
    """One speech-like utterance, deterministic in (speaker, utterance) seeds."""
    profile = speaker_profile(speaker_seed)
    rng = np.random.default_rng((speaker_seed << 20) ^ utterance_seed)
    target = rng.uniform(*duration_range_s) * fs
    pieces = []
    total = 0
    while total < target:
        syl = _syllable(rng, profile, fs)
        gap = np.zeros(int(rng.uniform(0.03, 0.12) * fs))
        if rng.random() < 0.12:
            gap = np.zeros(int(rng.uniform(0.2, 0.4) * fs))
        pieces.extend([syl, gap])
        total += syl.shape[0] + gap.shape[0]
    x = np.concatenate(pieces)
    peak = np.max(np.abs(x))
    if peak == 0.0:  # cannot happen with voiced probability > 0, but stay safe
        raise RuntimeError("generated an all-zero utterance")
    x = x / peak * 0.3
    return Waveform(x, fs)


def make_demo_corpus(
    root: str | Path,
    n_speakers: int = 12,
    utterances_per_speaker: int = 6,
    seed: int = 0,
    fs: int = DEFAULT_SAMPLE_RATE,
) -> list[Path]:
    """Write a corpus tree root/speakerNN/uttMM.wav; returns written paths."""
    from upitsep.corpus import write_wav

    root = Path(root)
    rng = np.random.default_rng(seed)
    paths = []
    for sp in range(n_speakers):
        speaker_seed = int(rng.integers(0, 2**31 - 1)) * 2 + (sp % 2)
        speaker_dir = root / f"speaker{sp:02d}"
        speaker_dir.mkdir(parents=True, exist_ok=True)
        for ut in range(utterances_per_speaker):
            utt_seed = int(rng.integers(0, 2**31 - 1))
            w = synth_utterance(speaker_seed, utt_seed, fs=fs)
            path = speaker_dir / f"utt{ut:02d}.wav"
            write_wav(w, path)
            paths.append(path)
    return paths
