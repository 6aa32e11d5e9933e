"""Synthetic noise generation and noise partitioning.

Two noise types are synthesized from a speech corpus:

* speech-shaped noise (SSN): white Gaussian noise filtered through the
  all-pole model of a single 12th-order LPC fit to a concatenation of
  randomly chosen sentences, normalized to unit RMS,
* babble (BBL): the corpus is randomly partitioned into groups, each group
  concatenated and normalized to unit total energy, truncated to the
  shortest group, and summed.

Long noise signals are split once into contiguous train/validation/test
partitions so that no evaluation mixture ever reuses training noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from upitsep.dsp import Waveform

DEFAULT_LPC_ORDER = 12


class DegenerateSignalError(ValueError):
    """The signal has no usable energy for model fitting."""


@dataclass(frozen=True)
class LpcModel:
    """All-pole model: predictor coefficients a_1..a_p and residual gain.

    The predictor is x_hat[n] = sum_k a_k x[n-k]; synthesis filters an
    excitation through 1 / (1 - sum_k a_k z^-k). ``gain`` is the
    prediction-error standard deviation.
    """

    order: int
    coefficients: np.ndarray
    gain: float

    @property
    def denominator(self) -> np.ndarray:
        """Polynomial for scipy.signal.lfilter: [1, -a_1, ..., -a_p]."""
        return np.concatenate(([1.0], -self.coefficients))


@dataclass(frozen=True)
class NoisePartition:
    train: Waveform
    validation: Waveform
    test: Waveform

    @property
    def boundaries(self) -> tuple[int, int, int]:
        """Cumulative end sample of each partition in the source signal."""
        a = self.train.num_samples
        b = a + self.validation.num_samples
        c = b + self.test.num_samples
        return (a, b, c)


def lpc_fit(waveform: Waveform, order: int = DEFAULT_LPC_ORDER) -> LpcModel:
    """Autocorrelation-method LPC via the Levinson-Durbin recursion.

    Biased autocorrelation estimates keep the fit stable by construction;
    the recursion asserts |reflection| < 1 at every step.
    """
    x = waveform.samples
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    n = x.shape[0]
    if n < 10 * order:
        raise ValueError(f"need at least {10 * order} samples for order {order}, got {n}")
    r = np.array([np.dot(x[: n - k], x[k:]) for k in range(order + 1)]) / n
    if r[0] <= 0.0:
        raise DegenerateSignalError("signal has zero energy")

    a = np.zeros(order)
    error = float(r[0])
    for m in range(1, order + 1):
        acc = r[m] - np.dot(a[: m - 1], r[m - 1 : 0 : -1])
        k = acc / error
        # Stability is guaranteed by the autocorrelation method.
        assert abs(k) < 1.0, f"reflection coefficient {k} out of range at step {m}"
        new_a = a.copy()
        new_a[m - 1] = k
        new_a[: m - 1] = a[: m - 1] - k * a[: m - 1][::-1]
        a = new_a
        error *= 1.0 - k * k
    return LpcModel(order=order, coefficients=a, gain=float(np.sqrt(error)))


def gen_ssn(
    sentences: list[Waveform] | tuple[Waveform, ...],
    n_sentences: int,
    duration_s: float,
    seed: int,
    order: int = DEFAULT_LPC_ORDER,
) -> tuple[Waveform, LpcModel]:
    """Generate speech-shaped noise matching a corpus' long-term spectrum.

    Randomly picks ``n_sentences`` sentences (without replacement), fits one
    LPC model to their concatenation, and filters seeded white Gaussian
    noise through the all-pole synthesis filter. Output is unit RMS.

    Returns the noise and the fitted model (for spectrum verification).
    """
    if not sentences:
        raise ValueError("empty sentence list")
    if n_sentences < 1 or n_sentences > len(sentences):
        raise ValueError(
            f"n_sentences {n_sentences} outside [1, {len(sentences)}]"
        )
    rates = {w.sample_rate for w in sentences}
    if len(rates) != 1:
        raise ValueError(f"sentences mix sample rates {sorted(rates)}")
    fs = rates.pop()
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(sentences), size=n_sentences, replace=False)
    concatenated = Waveform(
        np.concatenate([sentences[int(i)].samples for i in chosen]), fs
    )
    model = lpc_fit(concatenated, order=order)

    num_samples = int(round(duration_s * fs))
    if num_samples < 1:
        raise ValueError(f"duration {duration_s} s too short at {fs} Hz")
    excitation = rng.standard_normal(num_samples)
    shaped = lfilter([model.gain], model.denominator, excitation)
    shaped /= np.sqrt(np.mean(shaped**2))
    return Waveform(shaped, fs), model


def gen_bbl(
    sentences: list[Waveform] | tuple[Waveform, ...],
    n_groups: int,
    seed: int,
) -> Waveform:
    """Generate babble noise by summing normalized sentence groups.

    The corpus is randomly partitioned into ``n_groups`` groups; each group
    is concatenated, normalized to unit total energy, truncated to the
    shortest group's length, and the groups are summed.
    """
    if n_groups < 1:
        raise ValueError(f"n_groups must be >= 1, got {n_groups}")
    if len(sentences) < n_groups:
        raise ValueError(
            f"cannot split {len(sentences)} sentences into {n_groups} non-empty groups"
        )
    rates = {w.sample_rate for w in sentences}
    if len(rates) != 1:
        raise ValueError(f"sentences mix sample rates {sorted(rates)}")
    fs = rates.pop()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sentences))
    base, extra = divmod(len(sentences), n_groups)
    streams = []
    pos = 0
    for g in range(n_groups):
        size = base + (1 if g < extra else 0)
        indices = order[pos : pos + size]
        pos += size
        concatenated = np.concatenate([sentences[int(i)].samples for i in indices])
        energy = float(np.dot(concatenated, concatenated))
        if energy == 0.0:
            raise DegenerateSignalError(f"group {g} has zero energy")
        streams.append(concatenated / np.sqrt(energy))
    min_len = min(s.shape[0] for s in streams)
    babble = np.sum([s[:min_len] for s in streams], axis=0)
    return Waveform(babble, fs)


def partition_noise(
    noise: Waveform, ratios: tuple[float, float, float] = (8.0, 1.0, 1.0)
) -> NoisePartition:
    """Split a noise signal into contiguous train/validation/test slices.

    Boundaries are placed at the rounded cumulative ratios; concatenating
    the three partitions reproduces the input bit-exactly.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"need 3 positive ratios, got {ratios}")
    n = noise.num_samples
    total = float(sum(ratios))
    b1 = int(round(n * ratios[0] / total))
    b2 = int(round(n * (ratios[0] + ratios[1]) / total))
    if not 0 < b1 < b2 < n:
        raise ValueError(
            f"noise of {n} samples too short for ratios {ratios} (bounds {b1}, {b2})"
        )
    fs = noise.sample_rate
    return NoisePartition(
        train=Waveform(noise.samples[:b1], fs),
        validation=Waveform(noise.samples[b1:b2], fs),
        test=Waveform(noise.samples[b2:], fs),
    )
