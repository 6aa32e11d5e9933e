"""Active speech level measurement.

Implements the envelope-tracking active level meter used for calibrating
speaker level offsets and mixture SNRs: a cascade of two 0.03 s exponential
averagers over the rectified signal, a 0.2 s hangover, and a 15.9 dB margin
between candidate active level and detection threshold, solved over a
power-of-two ladder of candidate thresholds.

The ladder is anchored at the signal's own peak (peak * 2^-j, j = 1..15), so
the measurement is exactly scale-equivariant: scaling the waveform by g
shifts the level by 20*log10(g). Noise levels elsewhere in the toolkit use
plain RMS power; this meter is applied to speech only.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from upitsep.dsp import Waveform

ENVELOPE_TIME_CONSTANT_S = 0.03
HANGOVER_S = 0.2
MARGIN_DB = 15.9
_NUM_THRESHOLDS = 15
_MIN_DURATION_S = 0.1


class NoActiveSpeechError(ValueError):
    """The waveform contains no measurable speech activity."""


class SignalTooShortError(ValueError):
    """The waveform is too short for a meaningful level estimate."""


def _activity_count(active: np.ndarray, hangover: int) -> int:
    """Count samples that are active or within ``hangover`` of the last active one."""
    n = active.shape[0]
    idx = np.arange(n)
    last_active = np.maximum.accumulate(np.where(active, idx, -(hangover + 1)))
    return int(np.count_nonzero(idx - last_active <= hangover))


def _interpolate_crossing(
    upper_level: float, upper_thr: float, lower_level: float, lower_thr: float
) -> float:
    """Solve (level - threshold) = margin on the segment between ladder points.

    Both coordinates are interpolated linearly in dB; the level/threshold
    difference is linear along the segment, so the crossing has a closed form.
    """
    upper_diff = upper_level - upper_thr
    lower_diff = lower_level - lower_thr
    if upper_diff == lower_diff:
        return upper_level
    t = (upper_diff - MARGIN_DB) / (upper_diff - lower_diff)
    t = min(max(t, 0.0), 1.0)
    return upper_level + t * (lower_level - upper_level)


def active_speech_level(waveform: Waveform) -> float:
    """Active speech level in dB relative to unit full scale.

    Raises:
        SignalTooShortError: shorter than 100 ms.
        NoActiveSpeechError: identically zero or no threshold activity.
    """
    x = waveform.samples
    fs = waveform.sample_rate
    if x.shape[0] < _MIN_DURATION_S * fs:
        raise SignalTooShortError(
            f"need at least {_MIN_DURATION_S:.1f} s at {fs} Hz, got {x.shape[0]} samples"
        )
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise NoActiveSpeechError("waveform is identically zero")

    sq = float(np.dot(x, x))
    g = float(np.exp(-1.0 / (fs * ENVELOPE_TIME_CONSTANT_S)))
    rectified = np.abs(x)
    p = lfilter([1.0 - g], [1.0, -g], rectified)
    envelope = lfilter([1.0 - g], [1.0, -g], p)
    hangover = int(round(HANGOVER_S * fs))

    # Ascending ladder: peak * 2^-15 ... peak * 2^-1.
    exponents = np.arange(_NUM_THRESHOLDS, 0, -1)
    thresholds = peak * np.exp2(-exponents.astype(np.float64))

    levels_db = np.full(_NUM_THRESHOLDS, np.nan)
    thresholds_db = 20.0 * np.log10(thresholds)
    for j, c in enumerate(thresholds):
        count = _activity_count(envelope >= c, hangover)
        if count > 0:
            levels_db[j] = 10.0 * np.log10(sq / count)

    valid = ~np.isnan(levels_db)
    if not valid.any():
        raise NoActiveSpeechError("envelope never exceeds the lowest candidate threshold")

    diffs = levels_db - thresholds_db
    if diffs[0] < MARGIN_DB:
        # Degenerate dynamics: everything is active at the lowest threshold.
        return float(levels_db[0])
    for j in range(_NUM_THRESHOLDS - 1):
        if not valid[j + 1] or diffs[j + 1] < MARGIN_DB:
            if not valid[j + 1]:
                return float(levels_db[j])
            return float(
                _interpolate_crossing(
                    levels_db[j], thresholds_db[j], levels_db[j + 1], thresholds_db[j + 1]
                )
            )
    return float(levels_db[_NUM_THRESHOLDS - 1])
