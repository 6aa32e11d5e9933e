"""Short-time spectral analysis and synthesis.

Fixed conventions used throughout the toolkit:

* frames start at sample 0 and advance by ``hop`` samples; the tail is
  zero-padded so every input sample is covered by at least one frame,
* single-sided spectra with ``fft_size // 2 + 1`` bins,
* the phase of an exactly-zero bin is 0,
* synthesis windows with the analysis window and divides the overlap-add
  output by the accumulated squared window, which makes the round trip
  exact (the window is strictly positive, see ``_window``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatchError(ValueError):
    """Operands describe incompatible grid shapes or configurations."""


@dataclass(frozen=True)
class Waveform:
    """A mono waveform with its sample rate.

    Samples are float64; full scale is 1.0. Finiteness is validated at
    construction so downstream numerics can assume clean input.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    """Analysis grid: 256-point FFT of 256-sample windows, 128-sample hop.

    The defaults give 129 single-sided bins and, at 8 kHz, 32 ms windows
    with a 16 ms shift.
    """

    fft_size: int = 256
    window_length: int = 256
    hop: int = 128
    window: str = "hann"

    def __post_init__(self):
        if self.hop <= 0 or self.window_length <= 0 or self.fft_size <= 0:
            raise ValueError("fft_size, window_length and hop must be positive")
        if self.hop > self.window_length:
            raise ValueError("hop must not exceed window_length (gaps would drop samples)")
        if self.window_length > self.fft_size:
            raise ValueError("window_length must not exceed fft_size")
        _window(self.window, self.window_length)  # validates the identifier

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


def _window(name: str, length: int) -> np.ndarray:
    if name == "hann":
        # Half-sample-offset Hann: strictly positive, so every sample keeps
        # nonzero analysis weight and the inverse is exact at the edges.
        n = np.arange(length)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * (n + 0.5) / length)
    if name == "rect":
        return np.ones(length)
    raise ValueError(f"unknown window {name!r} (expected 'hann' or 'rect')")


@dataclass(frozen=True)
class ComplexSpectrogram:
    frames: np.ndarray  # (num_frames, num_bins) complex128
    config: StftConfig
    original_length: int
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class MagnitudeSpectrogram:
    frames: np.ndarray  # (num_frames, num_bins) float64, nonnegative
    config: StftConfig
    original_length: int
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class PhaseSpectrogram:
    frames: np.ndarray  # (num_frames, num_bins) float64, radians in (-pi, pi]
    config: StftConfig
    original_length: int
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


def frame_count(num_samples: int, config: StftConfig) -> int:
    """Number of frames needed to cover ``num_samples`` with tail padding."""
    if num_samples <= 0:
        raise ValueError("cannot frame an empty signal")
    if num_samples <= config.window_length:
        return 1
    return int(-(-(num_samples - config.window_length) // config.hop)) + 1


def wrap_phase(radians: np.ndarray) -> np.ndarray:
    """Wrap angles to (-pi, pi]."""
    wrapped = np.mod(np.asarray(radians, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, np.pi, wrapped)


def stft(waveform: Waveform, config: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """Analyze a waveform into a single-sided complex spectrogram.

    Frame ``i`` covers samples ``[i * hop, i * hop + window_length)``; the
    final frame is zero-padded so every sample is covered.
    """
    x = waveform.samples
    if x.shape[0] == 0:
        raise ValueError("cannot analyze an empty waveform")
    num_frames = frame_count(x.shape[0], config)
    win = _window(config.window, config.window_length)
    padded_len = (num_frames - 1) * config.hop + config.window_length
    padded = np.zeros(padded_len)
    padded[: x.shape[0]] = x
    starts = np.arange(num_frames) * config.hop
    frames = padded[starts[:, None] + np.arange(config.window_length)[None, :]]
    spectra = np.fft.rfft(frames * win, n=config.fft_size, axis=1)
    return ComplexSpectrogram(spectra, config, x.shape[0], waveform.sample_rate)


def magnitude(spec: ComplexSpectrogram) -> MagnitudeSpectrogram:
    return MagnitudeSpectrogram(
        np.abs(spec.frames), spec.config, spec.original_length, spec.sample_rate
    )


def phase(spec: ComplexSpectrogram) -> PhaseSpectrogram:
    # np.angle(0) is 0.0, which is exactly the convention for zero bins;
    # a -pi result (negative real axis approached from below) maps to +pi.
    angles = np.angle(spec.frames)
    angles = np.where(angles <= -np.pi, np.pi, angles)
    return PhaseSpectrogram(angles, spec.config, spec.original_length, spec.sample_rate)


def inverse_stft(mag: MagnitudeSpectrogram, phase_spec: PhaseSpectrogram) -> Waveform:
    """Resynthesize a waveform from magnitude and phase grids.

    Bins above fft_size//2 are reconstructed by conjugate symmetry. The
    overlap-add output is divided by the accumulated squared window, then
    trimmed to the original length.
    """
    if mag.frames.shape != phase_spec.frames.shape:
        raise DimensionMismatchError(
            f"magnitude grid {mag.frames.shape} vs phase grid {phase_spec.frames.shape}"
        )
    if mag.config != phase_spec.config:
        raise DimensionMismatchError("magnitude and phase use different analysis configs")
    config = mag.config
    win = _window(config.window, config.window_length)
    spectra = mag.frames * np.exp(1j * phase_spec.frames)
    frames = np.fft.irfft(spectra, n=config.fft_size, axis=1)[:, : config.window_length]
    num_frames = mag.num_frames
    padded_len = (num_frames - 1) * config.hop + config.window_length
    out = np.zeros(padded_len)
    norm = np.zeros(padded_len)
    wsq = win * win
    for i in range(num_frames):
        start = i * config.hop
        out[start : start + config.window_length] += frames[i] * win
        norm[start : start + config.window_length] += wsq
    out /= norm
    return Waveform(out[: mag.original_length], mag.sample_rate)


def apply_mask(mask: np.ndarray, mag: MagnitudeSpectrogram) -> MagnitudeSpectrogram:
    """Multiply a magnitude grid by a mask, clamping the mask at 0."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != mag.frames.shape:
        raise DimensionMismatchError(
            f"mask grid {mask.shape} vs magnitude grid {mag.frames.shape}"
        )
    return MagnitudeSpectrogram(
        np.maximum(mask, 0.0) * mag.frames, mag.config, mag.original_length, mag.sample_rate
    )
