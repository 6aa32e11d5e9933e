"""Training loop: target preparation, SGD/decay schedule, separation paths."""

import dataclasses

import numpy as np
import pytest

from upitsep.blstm import BlstmConfig, BlstmNetwork
from upitsep.demo import synth_utterance
from upitsep.dsp import StftConfig, Waveform, magnitude, phase, stft
from upitsep.losses import clamp_mask, ipsf_mask, phase_difference, psa_target
from upitsep.training import (
    NumericTrainingError,
    TrainSchedule,
    UtteranceData,
    evaluate_loss,
    oracle_separate,
    prepare_utterance,
    separate,
    train,
)

FS = 8000
STFT = StftConfig()


def _two_source_mixture(seed: int, n: int = 6000):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / FS
    a = np.sin(2 * np.pi * 300 * t) * (1 + 0.3 * np.sin(2 * np.pi * 3 * t))
    b = rng.standard_normal(n) * 0.3
    sources = (Waveform(a * 0.3, FS), Waveform(b, FS))
    mix = Waveform(sources[0].samples + sources[1].samples, FS)
    return mix, sources


def _tiny_net(sources: int = 2, seed: int = 0) -> BlstmNetwork:
    config = BlstmConfig(
        num_layers=1,
        cells_per_direction=24,
        input_dim=STFT.num_bins,
        output_sources=sources,
        bins_per_source=STFT.num_bins,
        dropout_rate=0.0,
    )
    return BlstmNetwork.initialize(config, seed=seed)


class TestPrepareUtterance:
    def test_shapes(self):
        mix, sources = _two_source_mixture(0)
        utt = prepare_utterance(mix, sources, STFT, uid="u0")
        frames = stft(mix, STFT).frames.shape[0]
        assert utt.features.shape == (frames, STFT.num_bins)
        assert utt.targets.shape == (2, frames, STFT.num_bins)
        assert utt.uid == "u0"

    def test_targets_are_phase_discounted_source_magnitudes(self):
        mix, sources = _two_source_mixture(1)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        mix_spec = stft(mix, STFT)
        mix_phase = phase(mix_spec).frames
        for s, src in enumerate(sources):
            spec = stft(src, STFT)
            expected = psa_target(
                magnitude(spec).frames,
                phase_difference(mix_phase, phase(spec).frames),
            )
            np.testing.assert_allclose(utt.targets[s], expected, atol=1e-12)

    def test_features_are_mixture_magnitudes(self):
        mix, sources = _two_source_mixture(2)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        np.testing.assert_allclose(
            utt.features, magnitude(stft(mix, STFT)).frames, atol=0
        )

    def test_length_mismatch_rejected(self):
        mix, sources = _two_source_mixture(3)
        short = Waveform(sources[0].samples[:-100], FS)
        with pytest.raises(ValueError):
            prepare_utterance(mix, (short, sources[1]), STFT, uid="u")


class TestTrainLoop:
    def test_single_utterance_overfit(self):
        # The core sanity check for the whole gradient/update path: a small
        # net fitting one utterance must drive the loss well below its
        # starting point. Speech-like sources keep every output bin exposed
        # to gradient (pure tones can leave isolated output units with
        # z < 0 at every frame, which ReLU never revives).
        u1 = synth_utterance(2, 5, duration_range_s=(1.0, 1.2))
        u2 = synth_utterance(5, 9, duration_range_s=(1.0, 1.2))
        nmin = min(u1.num_samples, u2.num_samples)
        s1 = Waveform(u1.samples[:nmin], FS)
        s2 = Waveform(u2.samples[:nmin], FS)
        mix = Waveform(s1.samples + s2.samples, FS)
        utt = prepare_utterance(mix, (s1, s2), STFT, uid="u")
        net = _tiny_net(seed=3)
        initial = evaluate_loss(net, [utt])
        schedule = TrainSchedule(
            lr_initial=3e-4, max_epochs=400, minibatch_utterances=1, seed=0
        )
        result = train(net, [utt], schedule)
        final = evaluate_loss(net, [utt])
        assert final < 0.3 * initial  # measured ~0.16x
        assert result.epochs_run == 400
        assert len(result.train_losses) == 400

    def test_double_run_bit_identical(self):
        mix, sources = _two_source_mixture(11)
        utts = [
            prepare_utterance(mix, sources, STFT, uid="a"),
            prepare_utterance(
                *_two_source_mixture(12), config=STFT, uid="b"
            ),
        ]
        schedule = TrainSchedule(lr_initial=1e-4, max_epochs=5, seed=7)
        results = []
        params = []
        for _ in range(2):
            net = _tiny_net(seed=1)
            results.append(train(net, utts, schedule))
            params.append(net.params.copy())
        assert results[0].train_losses == results[1].train_losses
        assert np.array_equal(params[0], params[1])

    def test_dropout_training_is_seeded(self):
        # With dropout active the per-visit masks come from the schedule's
        # rng stream, so identical seeds still give identical runs.
        mix, sources = _two_source_mixture(13)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        config = BlstmConfig(
            num_layers=2,
            cells_per_direction=12,
            input_dim=STFT.num_bins,
            output_sources=2,
            bins_per_source=STFT.num_bins,
            dropout_rate=0.5,
        )
        schedule = TrainSchedule(lr_initial=1e-4, max_epochs=3, seed=5)
        histories = []
        for _ in range(2):
            net = BlstmNetwork.initialize(config, seed=2)
            histories.append(train(net, [utt], schedule).train_losses)
        assert histories[0] == histories[1]

    def test_learning_rate_decays_on_loss_increase(self):
        # A huge learning rate makes the loss climb, which must trigger
        # the multiplicative decay between consecutive epochs.
        mix, sources = _two_source_mixture(14)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        net = _tiny_net(seed=4)
        schedule = TrainSchedule(
            lr_initial=5.0, lr_decay=0.7, max_epochs=6, minibatch_utterances=1, seed=0
        )
        try:
            result = train(net, [utt], schedule)
        except NumericTrainingError:
            pytest.skip("diverged to non-finite before any decay was observed")
        increased = [
            i
            for i in range(1, len(result.train_losses))
            if result.train_losses[i] > result.train_losses[i - 1]
        ]
        assert increased, "expected at least one loss increase at lr=5.0"
        first = increased[0]
        np.testing.assert_allclose(
            result.learning_rates[first + 1],
            result.learning_rates[first] * 0.7,
            rtol=1e-12,
        )

    def test_lr_floor_stops_training(self):
        mix, sources = _two_source_mixture(15)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        net = _tiny_net(seed=5)
        # Start just above the floor with aggressive decay; a couple of
        # increases push it under.
        schedule = TrainSchedule(
            lr_initial=2e-10,
            lr_decay=0.1,
            lr_floor=1e-10,
            max_epochs=500,
            minibatch_utterances=1,
            seed=0,
        )
        # Force decays by making the "previous loss" comparison fail
        # naturally: with lr this small the loss barely moves, so ties are
        # possible; instead drive it with a big lr and tiny floor gap.
        schedule = dataclasses.replace(schedule, lr_initial=5.0, lr_floor=4.9)
        result = train(net, [utt], schedule)
        assert result.stopped_reason == "learning rate fell below floor"
        assert result.epochs_run < 500

    def test_validation_losses_recorded(self):
        mix, sources = _two_source_mixture(16)
        train_utt = prepare_utterance(mix, sources, STFT, uid="tr")
        val_utt = prepare_utterance(*_two_source_mixture(17), config=STFT, uid="va")
        net = _tiny_net(seed=6)
        schedule = TrainSchedule(lr_initial=1e-4, max_epochs=4, seed=0)
        result = train(net, [train_utt], schedule, validation_data=[val_utt])
        assert len(result.validation_losses) == 4
        assert all(np.isfinite(v) for v in result.validation_losses)

    def test_source_count_mismatch_rejected(self):
        mix, sources = _two_source_mixture(18)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        net = _tiny_net(sources=3)
        with pytest.raises(ValueError):
            train(net, [utt], TrainSchedule(max_epochs=1))

    def test_nonfinite_update_raises(self):
        mix, sources = _two_source_mixture(19)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        net = _tiny_net(seed=7)
        net.params[:] = np.inf
        with np.errstate(invalid="ignore"), pytest.raises(NumericTrainingError):
            train(net, [utt], TrainSchedule(max_epochs=1))

    def test_gradient_clipping_bounds_update(self):
        mix, sources = _two_source_mixture(20)
        utt = prepare_utterance(mix, sources, STFT, uid="u")
        schedule = TrainSchedule(
            lr_initial=1e-3,
            max_epochs=1,
            minibatch_utterances=1,
            seed=0,
            grad_clip_norm=1.0,
        )
        net = _tiny_net(seed=8)
        before = net.params.copy()
        train(net, [utt], schedule)
        step_norm = np.linalg.norm(net.params - before)
        assert step_norm <= schedule.lr_initial * 1.0 + 1e-12


class TestSeparation:
    def test_separate_output_shape(self):
        mix, _ = _two_source_mixture(30)
        net = _tiny_net(sources=2, seed=9)
        outs = separate(net, mix, STFT)
        assert len(outs) == 2
        for o in outs:
            assert o.num_samples == mix.num_samples
            assert o.sample_rate == mix.sample_rate

    def test_separate_on_speechlike_input(self):
        mix = synth_utterance(4, 99)
        net = _tiny_net(sources=2, seed=10)
        outs = separate(net, mix, STFT)
        assert all(np.all(np.isfinite(o.samples)) for o in outs)

    def test_oracle_separate_near_perfect_on_disjoint_bands(self):
        # Two sources living in well-separated frequency bands: the
        # phase-discounted oracle mask recovers each almost exactly.
        n = 8000
        t = np.arange(n) / FS
        lo = Waveform(np.sin(2 * np.pi * 200 * t) * 0.3, FS)
        hi = Waveform(np.sin(2 * np.pi * 3000 * t) * 0.3, FS)
        mix = Waveform(lo.samples + hi.samples, FS)
        outs = oracle_separate(mix, (lo, hi), STFT)
        assert len(outs) == 2
        for est, ref in zip(outs, (lo, hi)):
            err = np.sqrt(np.mean((est.samples - ref.samples) ** 2))
            scale = np.sqrt(np.mean(ref.samples**2))
            assert err < 0.02 * scale

    def test_oracle_masks_match_direct_construction(self):
        # Rebuild one output by hand on the same hop-padded grid the
        # oracle uses for edge-safe synthesis.
        mix, sources = _two_source_mixture(31)
        pad = np.zeros(STFT.hop)
        padded_mix = Waveform(np.concatenate([pad, mix.samples, pad]), FS)
        mix_spec = stft(padded_mix, STFT)
        r = magnitude(mix_spec).frames
        mix_phase = phase(mix_spec).frames
        outs = oracle_separate(mix, sources, STFT)
        for est, src in zip(outs, sources):
            padded_src = Waveform(np.concatenate([pad, src.samples, pad]), FS)
            spec = stft(padded_src, STFT)
            mask = clamp_mask(
                ipsf_mask(
                    magnitude(spec).frames,
                    phase_difference(mix_phase, phase(spec).frames),
                    r,
                )
            )
            # Reconstruct by the same route and compare waveforms.
            from upitsep.dsp import apply_mask, inverse_stft

            masked = apply_mask(mask, magnitude(mix_spec))
            rebuilt = inverse_stft(masked, phase(mix_spec))
            trimmed = rebuilt.samples[STFT.hop : STFT.hop + mix.num_samples]
            np.testing.assert_allclose(est.samples, trimmed, atol=1e-12)

    def test_masked_resynthesis_bounded_at_edges(self):
        # A mask makes the spectrogram inconsistent; the hop padding keeps
        # the overlap-add normalization from amplifying the first and last
        # hop of the signal.
        rng = np.random.default_rng(8)
        mix, sources = _two_source_mixture(47)
        noisy = Waveform(mix.samples + 0.5 * rng.standard_normal(mix.num_samples), FS)
        outs = oracle_separate(noisy, sources, STFT)
        for est, src in zip(outs, sources):
            head = np.sqrt(np.mean(est.samples[: STFT.hop] ** 2))
            body = np.sqrt(np.mean(est.samples**2))
            assert head < 5 * (body + 1e-12)


class TestUtteranceData:
    def test_fields(self):
        feats = np.zeros((4, 129))
        targs = np.zeros((2, 4, 129))
        utt = UtteranceData(uid="x", features=feats, targets=targs)
        assert utt.uid == "x"
        assert utt.features.shape == (4, 129)
