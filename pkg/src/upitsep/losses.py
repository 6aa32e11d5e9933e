"""Oracle masks and permutation invariant phase-sensitive losses.

Conventions: masks and targets are stacked numpy arrays. A set of S masks
is shaped (S, frames, bins); the mixture magnitude r is (frames, bins).
The phase-sensitive target of a source is its magnitude times the cosine
of the mixture-source phase difference, precomputed by ``psa_target``.

The frame-level loss assigns targets to outputs independently per frame;
the utterance-level variant picks one assignment that minimizes the loss
summed over the whole utterance and uses it for every frame, which is what
makes the separated streams stay on a consistent output channel. Ties are
broken by lexicographically smallest permutation. All losses are raw sums
of squares; ``upit_loss`` additionally reports the sum normalized by
(frames x bins x sources) for comparable numbers across utterance lengths.
"""

from __future__ import annotations

import itertools

import numpy as np

from upitsep.dsp import wrap_phase

EPS_FLOOR_FACTOR = 1e-8
RECONSTRUCTION_MASK_RANGE = (0.0, 2.0)


def phase_difference(mixture_phase: np.ndarray, source_phase: np.ndarray) -> np.ndarray:
    """Mixture phase minus source phase, wrapped to (-pi, pi]."""
    mixture_phase = np.asarray(mixture_phase, dtype=np.float64)
    source_phase = np.asarray(source_phase, dtype=np.float64)
    if mixture_phase.shape != source_phase.shape:
        raise ValueError(
            f"phase grids disagree: {mixture_phase.shape} vs {source_phase.shape}"
        )
    return wrap_phase(mixture_phase - source_phase)


def psa_target(source_magnitude: np.ndarray, phase_diff: np.ndarray) -> np.ndarray:
    """Phase-sensitive regression target: magnitude times cosine of phase difference."""
    source_magnitude = np.asarray(source_magnitude, dtype=np.float64)
    phase_diff = np.asarray(phase_diff, dtype=np.float64)
    if source_magnitude.shape != phase_diff.shape:
        raise ValueError(
            f"magnitude grid {source_magnitude.shape} vs phase grid {phase_diff.shape}"
        )
    return source_magnitude * np.cos(phase_diff)


def ipsf_mask(
    source_magnitude: np.ndarray, phase_diff: np.ndarray, mixture_magnitude: np.ndarray
) -> np.ndarray:
    """Ideal phase-sensitive filter: a * cos(phase difference) / r.

    Entries where the mixture magnitude falls at or below a floor of
    1e-8 times its maximum are set to 0. The result is not clamped; it can
    be negative or exceed 1. Clamp with ``clamp_mask`` before resynthesis.
    """
    r = np.asarray(mixture_magnitude, dtype=np.float64)
    target = psa_target(source_magnitude, phase_diff)
    if target.shape != r.shape:
        raise ValueError(f"target grid {target.shape} vs mixture grid {r.shape}")
    floor = EPS_FLOOR_FACTOR * float(r.max()) if r.size else 0.0
    usable = r > floor
    mask = np.zeros_like(r)
    np.divide(target, r, out=mask, where=usable)
    return mask


def clamp_mask(mask: np.ndarray, bounds: tuple[float, float] = RECONSTRUCTION_MASK_RANGE):
    """Clamp a mask into the given range (default [0, 2], for resynthesis)."""
    return np.clip(np.asarray(mask, dtype=np.float64), bounds[0], bounds[1])


def irm_masks(source_magnitudes: np.ndarray) -> np.ndarray:
    """Ideal ratio masks a_s / sum_s' a_s' for a stacked (S, K, F) input."""
    a = np.asarray(source_magnitudes, dtype=np.float64)
    total = a.sum(axis=0, keepdims=True)
    floor = EPS_FLOOR_FACTOR * float(total.max()) if total.size else 0.0
    out = np.zeros_like(a)
    np.divide(a, total, out=out, where=total > floor)
    return out


def iam_mask(source_magnitude: np.ndarray, mixture_magnitude: np.ndarray) -> np.ndarray:
    """Ideal amplitude mask a_s / r with the shared zero floor."""
    a = np.asarray(source_magnitude, dtype=np.float64)
    r = np.asarray(mixture_magnitude, dtype=np.float64)
    floor = EPS_FLOOR_FACTOR * float(r.max()) if r.size else 0.0
    out = np.zeros_like(r)
    np.divide(a, r, out=out, where=r > floor)
    return out


def _check_stacks(masks: np.ndarray, r: np.ndarray, targets: np.ndarray, frame_axis: bool):
    masks = np.asarray(masks, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    want = 3 if frame_axis else 2
    if masks.ndim != want or targets.ndim != want:
        raise ValueError(
            f"expected {want}-D mask/target stacks, got {masks.shape} and {targets.shape}"
        )
    if masks.shape != targets.shape:
        raise ValueError(f"mask stack {masks.shape} vs target stack {targets.shape}")
    if masks.shape[1:] != r.shape:
        raise ValueError(f"mask stack {masks.shape} vs mixture grid {r.shape}")
    return masks, r, targets


def psa_loss_frame(masks_i: np.ndarray, r_i: np.ndarray, targets_i: np.ndarray) -> float:
    """Phase-sensitive loss of one frame under the identity assignment.

    Args:
        masks_i: (S, bins) estimated masks for the frame.
        r_i: (bins,) mixture magnitude of the frame.
        targets_i: (S, bins) phase-sensitive targets (see ``psa_target``).
    """
    masks_i, r_i, targets_i = _check_stacks(masks_i, r_i, targets_i, frame_axis=False)
    diff = masks_i * r_i[None, :] - targets_i
    return float(np.sum(diff * diff))


def pit_frame_loss(
    masks_i: np.ndarray, r_i: np.ndarray, targets_i: np.ndarray
) -> tuple[float, tuple[int, ...]]:
    """Minimum frame loss over all target permutations.

    Returns (loss, permutation) where permutation[s] is the target index
    assigned to output s. Ties pick the lexicographically smallest
    permutation.
    """
    masks_i, r_i, targets_i = _check_stacks(masks_i, r_i, targets_i, frame_axis=False)
    estimates = masks_i * r_i[None, :]
    n = masks_i.shape[0]
    cost = np.empty((n, n))
    for s in range(n):
        for t in range(n):
            diff = estimates[s] - targets_i[t]
            cost[s, t] = np.dot(diff, diff)
    best_loss = np.inf
    best_perm: tuple[int, ...] = tuple(range(n))
    for perm in itertools.permutations(range(n)):
        loss = sum(cost[s, perm[s]] for s in range(n))
        if loss < best_loss:
            best_loss = loss
            best_perm = perm
    return float(best_loss), best_perm


def upit_permutation(
    masks: np.ndarray, r: np.ndarray, targets: np.ndarray
) -> tuple[int, ...]:
    """Single target assignment minimizing the loss over the whole utterance.

    Args:
        masks: (S, frames, bins) estimated masks.
        r: (frames, bins) mixture magnitude.
        targets: (S, frames, bins) phase-sensitive targets.

    Returns permutation theta with theta[s] = target index for output s;
    ties pick the lexicographically smallest permutation.
    """
    masks, r, targets = _check_stacks(masks, r, targets, frame_axis=True)
    estimates = masks * r[None, :, :]
    n = masks.shape[0]
    cost = np.empty((n, n))
    for s in range(n):
        for t in range(n):
            diff = estimates[s] - targets[t]
            cost[s, t] = np.sum(diff * diff)
    best_total = np.inf
    best_perm: tuple[int, ...] = tuple(range(n))
    for perm in itertools.permutations(range(n)):
        total = sum(cost[s, perm[s]] for s in range(n))
        if total < best_total:
            best_total = total
            best_perm = perm
    return best_perm


def upit_loss(
    masks: np.ndarray,
    r: np.ndarray,
    targets: np.ndarray,
    permutation: tuple[int, ...],
) -> tuple[float, np.ndarray]:
    """Utterance-level loss under one fixed target assignment.

    Returns (total, per_frame): per_frame holds the raw per-frame sums of
    squares under the fixed permutation; total is their sum normalized by
    (frames x bins x sources).
    """
    masks, r, targets = _check_stacks(masks, r, targets, frame_axis=True)
    _check_permutation(permutation, masks.shape[0])
    diff = masks * r[None, :, :] - targets[list(permutation)]
    per_frame = np.sum(diff * diff, axis=(0, 2))
    n_frames, n_bins = r.shape
    total = float(per_frame.sum()) / (n_frames * n_bins * masks.shape[0])
    return total, per_frame


def upit_loss_gradient(
    masks: np.ndarray,
    r: np.ndarray,
    targets: np.ndarray,
    permutation: tuple[int, ...],
) -> np.ndarray:
    """Gradient of the raw utterance loss with respect to every mask entry.

    d/dm of sum ||m r - t||^2 is 2 (m r - t) r, entrywise, with the target
    stack permuted by the fixed assignment.
    """
    masks, r, targets = _check_stacks(masks, r, targets, frame_axis=True)
    _check_permutation(permutation, masks.shape[0])
    return 2.0 * (masks * r[None, :, :] - targets[list(permutation)]) * r[None, :, :]


def _check_permutation(permutation: tuple[int, ...], n: int):
    if sorted(permutation) != list(range(n)):
        raise ValueError(f"{permutation} is not a permutation of 0..{n - 1}")
