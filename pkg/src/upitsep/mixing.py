"""Construction of multi-talker mixtures with controlled levels and SNR.

The first speaker is the level reference; every other speaker is gain-scaled
so its active speech level sits the requested offset below the reference.
Shorter utterances are zero-padded at the tail before levels are measured,
so the re-measured offsets match the requested ones exactly. Noise is scaled
against the active level of the noise-free mixture using plain RMS power on
the noise side.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from upitsep.dsp import Waveform
from upitsep.levels import active_speech_level

SILENT_SPEAKER_GAP_DB = 70.0
SNR_SANITY_RANGE_DB = (-30.0, 60.0)


class SampleRateMismatchError(ValueError):
    """Waveforms entering one mixture must share a sample rate."""


class NoiseTooShortError(ValueError):
    """The noise segment cannot cover the mixture."""


@dataclass(frozen=True)
class MixtureExample:
    """A mixture with its aligned constituent signals.

    ``mixture`` is always the exact sample-wise sum of ``sources`` plus
    ``noise`` (when present); every consumer may rely on that additivity.
    ``gains`` are the linear gains applied to the (padded) input utterances,
    reference speaker first.
    """

    mixture: Waveform
    sources: tuple[Waveform, ...]
    gains: tuple[float, ...]
    noise: Waveform | None = None
    noise_gain: float | None = None
    snr_db: float | None = None
    silent_speaker_present: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def sample_rate(self) -> int:
        return self.mixture.sample_rate

    @property
    def num_samples(self) -> int:
        return self.mixture.num_samples


def _pad_to(w: Waveform, num_samples: int) -> Waveform:
    if w.num_samples == num_samples:
        return w
    padded = np.zeros(num_samples)
    padded[: w.num_samples] = w.samples
    return Waveform(padded, w.sample_rate)


def mix_speakers(
    utterances: list[Waveform] | tuple[Waveform, ...],
    level_offsets_db: list[float] | tuple[float, ...],
) -> MixtureExample:
    """Mix 2 or 3 utterances at controlled active-level offsets.

    Args:
        utterances: 2 or 3 utterances; the first is the level reference.
        level_offsets_db: one nonnegative offset per non-reference speaker;
            speaker ``s`` ends up ``level_offsets_db[s-1]`` dB below the
            reference's active level.
    """
    if not 2 <= len(utterances) <= 3:
        raise ValueError(f"expected 2 or 3 utterances, got {len(utterances)}")
    if len(level_offsets_db) != len(utterances) - 1:
        raise ValueError(
            f"expected {len(utterances) - 1} level offsets, got {len(level_offsets_db)}"
        )
    offsets = [float(o) for o in level_offsets_db]
    if any(o < 0.0 for o in offsets):
        raise ValueError(f"level offsets must be nonnegative, got {offsets}")
    rates = {w.sample_rate for w in utterances}
    if len(rates) != 1:
        raise SampleRateMismatchError(f"utterances mix sample rates {sorted(rates)}")

    target_len = max(w.num_samples for w in utterances)
    padded = [_pad_to(w, target_len) for w in utterances]
    levels = [active_speech_level(w) for w in padded]

    gains = [1.0]
    for offset, level in zip(offsets, levels[1:]):
        gains.append(10.0 ** ((levels[0] - offset - level) / 20.0))
    sources = tuple(
        Waveform(w.samples * g, w.sample_rate) for w, g in zip(padded, gains)
    )
    mixture = Waveform(np.sum([s.samples for s in sources], axis=0), padded[0].sample_rate)
    return MixtureExample(mixture=mixture, sources=sources, gains=tuple(gains))


def add_silent_speaker(example: MixtureExample, seed: int) -> MixtureExample:
    """Append a third, effectively silent source to a two-speaker example.

    The added source is white Gaussian noise whose mean-square energy sits
    exactly 70 dB below the arithmetic mean of the two real sources'
    mean-square energies; it keeps a three-output model's third target
    well-defined without audibly changing the mixture.
    """
    if len(example.sources) != 2:
        raise ValueError(f"expected exactly 2 sources, got {len(example.sources)}")
    if example.noise is not None:
        raise ValueError("add the silent speaker before the additive noise")
    energies = [float(np.mean(s.samples**2)) for s in example.sources]
    target_ms = float(np.mean(energies)) * 10.0 ** (-SILENT_SPEAKER_GAP_DB / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(example.num_samples)
    # Normalize to the exact target mean square so the gap holds by construction.
    noise *= np.sqrt(target_ms / np.mean(noise**2))
    silent = Waveform(noise, example.sample_rate)
    mixture = Waveform(example.mixture.samples + silent.samples, example.sample_rate)
    return replace(
        example,
        mixture=mixture,
        sources=example.sources + (silent,),
        silent_speaker_present=True,
    )


def add_noise_at_snr(
    example: MixtureExample,
    noise: Waveform,
    snr_db: float,
    offset: int = 0,
) -> MixtureExample:
    """Add a noise segment at a prescribed SNR.

    SNR is defined as the active speech level of the noise-free mixture
    minus the mean-square power (in dB) of the scaled noise segment.

    Args:
        example: mixture without noise.
        noise: noise signal to slice from.
        snr_db: target SNR in dB, within the sanity range [-30, 60].
        offset: start sample of the segment within ``noise``.
    """
    if example.noise is not None:
        raise ValueError("example already has noise")
    if not SNR_SANITY_RANGE_DB[0] <= snr_db <= SNR_SANITY_RANGE_DB[1]:
        raise ValueError(
            f"snr_db {snr_db} outside sanity range {SNR_SANITY_RANGE_DB}"
        )
    if noise.sample_rate != example.sample_rate:
        raise SampleRateMismatchError(
            f"noise at {noise.sample_rate} Hz vs mixture at {example.sample_rate} Hz"
        )
    if offset < 0 or offset + example.num_samples > noise.num_samples:
        raise NoiseTooShortError(
            f"segment [{offset}, {offset + example.num_samples}) outside noise of "
            f"{noise.num_samples} samples"
        )
    segment = noise.samples[offset : offset + example.num_samples]
    noise_power = float(np.mean(segment**2))
    if noise_power == 0.0:
        raise ValueError("noise segment is identically zero")
    mixture_level_db = active_speech_level(example.mixture)
    noise_level_db = 10.0 * np.log10(noise_power)
    gain = 10.0 ** ((mixture_level_db - noise_level_db - snr_db) / 20.0)
    scaled = Waveform(segment * gain, example.sample_rate)
    mixture = Waveform(example.mixture.samples + scaled.samples, example.sample_rate)
    return replace(
        example,
        mixture=mixture,
        noise=scaled,
        noise_gain=float(gain),
        snr_db=float(snr_db),
    )
