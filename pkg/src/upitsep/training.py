"""Training loop and waveform-level separation.

Training minimizes the utterance-level permutation invariant
phase-sensitive loss with plain SGD. The learning rate is a "per frame"
rate: each update subtracts lr times the gradient of the raw loss summed
over the minibatch. After every epoch the mean training loss (normalized,
see losses module) is compared with the previous epoch's; if it increased,
the rate is scaled by the decay factor. Training stops when the rate falls
below the floor or the epoch budget is exhausted.

All randomness (shuffling, per-visit dropout seeds) flows from one seed,
and gradients are reduced in utterance order, so runs with equal seeds and
data produce bit-identical loss histories and parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from upitsep.blstm import BlstmNetwork, backward, forward
from upitsep.dsp import StftConfig, Waveform, apply_mask, inverse_stft, magnitude, phase, stft
from upitsep.losses import (
    clamp_mask,
    ipsf_mask,
    phase_difference,
    psa_target,
    upit_loss,
    upit_loss_gradient,
    upit_permutation,
)


class NumericTrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class TrainSchedule:
    """SGD schedule: initial rate, multiplicative decay on train-loss
    increase, termination floor, epoch budget, minibatch size, seed."""

    lr_initial: float = 2e-5
    lr_decay: float = 0.7
    lr_floor: float = 1e-10
    max_epochs: int = 200
    minibatch_utterances: int = 8
    seed: int = 0
    grad_clip_norm: float | None = None

    def __post_init__(self):
        if self.lr_initial <= 0:
            raise ValueError(f"lr_initial must be positive, got {self.lr_initial}")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError(f"lr_decay must be in (0, 1), got {self.lr_decay}")
        if not 0.0 < self.lr_floor < self.lr_initial:
            raise ValueError("lr_floor must be positive and below lr_initial")
        if self.max_epochs < 1 or self.minibatch_utterances < 1:
            raise ValueError("max_epochs and minibatch_utterances must be >= 1")
        if self.grad_clip_norm is not None and self.grad_clip_norm <= 0:
            raise ValueError(f"grad_clip_norm must be positive, got {self.grad_clip_norm}")


@dataclass(frozen=True)
class UtteranceData:
    """Preprocessed training example: mixture magnitude features and the
    per-source phase-sensitive targets on the same grid."""

    uid: str
    features: np.ndarray  # (frames, bins) mixture magnitude
    targets: np.ndarray  # (sources, frames, bins) a * cos(phase difference)

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


@dataclass
class TrainResult:
    train_losses: list[float] = field(default_factory=list)
    validation_losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    epochs_run: int = 0
    stopped_reason: str = ""


def prepare_utterance(
    mixture: Waveform,
    sources: list[Waveform] | tuple[Waveform, ...],
    config: StftConfig = StftConfig(),
    uid: str = "",
) -> UtteranceData:
    """Build features and phase-sensitive targets for one example."""
    mix_spec = stft(mixture, config)
    r = magnitude(mix_spec).frames
    phi_mix = phase(mix_spec).frames
    targets = np.empty((len(sources), r.shape[0], r.shape[1]))
    for s, src in enumerate(sources):
        if src.num_samples != mixture.num_samples:
            raise ValueError(
                f"source {s} has {src.num_samples} samples, mixture has "
                f"{mixture.num_samples}"
            )
        spec = stft(src, config)
        diff = phase_difference(phi_mix, phase(spec).frames)
        targets[s] = psa_target(magnitude(spec).frames, diff)
    return UtteranceData(uid=uid, features=r, targets=targets)


def _utterance_loss_and_grad(
    net: BlstmNetwork, utt: UtteranceData, train_mode: bool, dropout_seed: int
) -> tuple[float, np.ndarray | None]:
    masks, cache = forward(net, utt.features, train_mode=train_mode, dropout_seed=dropout_seed)
    perm = upit_permutation(masks, utt.features, utt.targets)
    loss, _ = upit_loss(masks, utt.features, utt.targets, perm)
    if not train_mode:
        return loss, None
    mask_grads = upit_loss_gradient(masks, utt.features, utt.targets, perm)
    grad = backward(net, cache, mask_grads)
    return loss, grad


def evaluate_loss(net: BlstmNetwork, data: list[UtteranceData] | tuple[UtteranceData, ...]) -> float:
    """Mean normalized loss over a dataset, inference mode."""
    if not data:
        raise ValueError("empty dataset")
    return float(
        np.mean([_utterance_loss_and_grad(net, u, False, 0)[0] for u in data])
    )


def train(
    net: BlstmNetwork,
    train_data: list[UtteranceData] | tuple[UtteranceData, ...],
    schedule: TrainSchedule,
    validation_data: list[UtteranceData] | tuple[UtteranceData, ...] = (),
) -> TrainResult:
    """Train the network in place; returns per-epoch loss histories."""
    if not train_data:
        raise ValueError("no training utterances")
    n_sources = {u.targets.shape[0] for u in train_data}
    if len(n_sources) != 1 or n_sources.pop() != net.config.output_sources:
        raise ValueError(
            f"training targets must all have {net.config.output_sources} sources"
        )
    rng = np.random.default_rng(schedule.seed)
    result = TrainResult()
    lr = schedule.lr_initial
    previous_loss = None
    for epoch in range(schedule.max_epochs):
        if lr < schedule.lr_floor:
            result.stopped_reason = "learning rate fell below floor"
            break
        order = rng.permutation(len(train_data))
        epoch_losses = []
        for start in range(0, len(order), schedule.minibatch_utterances):
            batch = order[start : start + schedule.minibatch_utterances]
            grad_total = np.zeros_like(net.params)
            for j in batch:
                dropout_seed = int(rng.integers(0, 2**63 - 1))
                loss, grad = _utterance_loss_and_grad(
                    net, train_data[int(j)], True, dropout_seed
                )
                if not np.isfinite(loss):
                    raise NumericTrainingError(
                        f"non-finite loss at epoch {epoch + 1}, utterance "
                        f"{train_data[int(j)].uid or int(j)}"
                    )
                epoch_losses.append(loss)
                grad_total += grad
            if not np.all(np.isfinite(grad_total)):
                raise NumericTrainingError(f"non-finite gradient at epoch {epoch + 1}")
            if schedule.grad_clip_norm is not None:
                norm = float(np.linalg.norm(grad_total))
                if norm > schedule.grad_clip_norm:
                    grad_total *= schedule.grad_clip_norm / norm
            net.params -= lr * grad_total
        mean_loss = float(np.mean(epoch_losses))
        result.train_losses.append(mean_loss)
        result.learning_rates.append(lr)
        if validation_data:
            result.validation_losses.append(evaluate_loss(net, validation_data))
        result.epochs_run = epoch + 1
        if previous_loss is not None and mean_loss > previous_loss:
            lr *= schedule.lr_decay
        previous_loss = mean_loss
    else:
        result.stopped_reason = "epoch budget exhausted"
    return result


def _edge_pad_amount(config: StftConfig) -> int:
    """Whole hops of zero padding giving every real sample full coverage."""
    return config.hop * (-(-(config.window_length - config.hop) // config.hop))


def _zero_padded(w: Waveform, head: int) -> Waveform:
    return Waveform(
        np.concatenate([np.zeros(head), w.samples, np.zeros(head)]), w.sample_rate
    )


def _resynthesize_masked(
    masks: np.ndarray, mixture: Waveform, config: StftConfig
) -> list[Waveform]:
    """Resynthesize masked mixture magnitudes with edge-safe window coverage.

    The analysis grid starts at sample 0, so the first and last hop of a
    signal are covered by one window only, right where its taper falls
    toward zero. Round trips stay exact anyway (consistent frames cancel
    the normalization), but a masked grid is not a valid spectrogram of
    anything, and the overlap-add division can then amplify boundary
    content by orders of magnitude. Analyzing a hop-padded copy of the
    mixture gives every real sample full window coverage; the masks are
    extended onto the padded grid by repeating their edge frames, and the
    padding is trimmed after synthesis.
    """
    head = _edge_pad_amount(config)
    spec = stft(_zero_padded(mixture, head), config)
    mag = magnitude(spec)
    phi = phase(spec)
    n_head = head // config.hop
    frame_map = np.clip(
        np.arange(spec.num_frames) - n_head, 0, masks.shape[-2] - 1
    )
    outputs = []
    for mask in masks:
        w = inverse_stft(apply_mask(mask[frame_map], mag), phi)
        outputs.append(
            Waveform(
                w.samples[head : head + mixture.num_samples], mixture.sample_rate
            )
        )
    return outputs


def separate(
    net: BlstmNetwork, mixture: Waveform, config: StftConfig = StftConfig()
) -> list[Waveform]:
    """Separate a mixture into the network's output streams.

    Masks the mixture magnitude with the estimated masks and resynthesizes
    with the mixture phase; outputs have exactly the input length.
    """
    masks, _ = forward(net, magnitude(stft(mixture, config)).frames)
    return _resynthesize_masked(masks, mixture, config)


def oracle_separate(
    mixture: Waveform,
    sources: list[Waveform] | tuple[Waveform, ...],
    config: StftConfig = StftConfig(),
) -> list[Waveform]:
    """Upper-bound separation with ideal phase-sensitive masks.

    Masks are built from the true sources, clamped to [0, 2] for
    resynthesis, and applied to the mixture magnitude with mixture phase.
    Mixture and sources are analyzed with the same hop padding that
    ``separate`` uses, so the masks are ideal on the padded grid too.
    """
    head = _edge_pad_amount(config)
    spec = stft(_zero_padded(mixture, head), config)
    mag = magnitude(spec)
    phi = phase(spec)
    outputs = []
    for src in sources:
        if src.num_samples != mixture.num_samples:
            raise ValueError("sources must be aligned with the mixture")
        s_spec = stft(_zero_padded(src, head), config)
        diff = phase_difference(phi.frames, phase(s_spec).frames)
        mask = clamp_mask(ipsf_mask(magnitude(s_spec).frames, diff, mag.frames))
        w = inverse_stft(apply_mask(mask, mag), phi)
        outputs.append(
            Waveform(
                w.samples[head : head + mixture.num_samples], mixture.sample_rate
            )
        )
    return outputs
