"""Multi-talker speech separation and denoising toolkit.

Single-channel source separation with a mask-estimating BLSTM trained by
utterance-level permutation invariant training on phase-sensitive magnitude
targets, plus the surrounding data synthesis (speaker mixing, speech-shaped
and babble noise) and evaluation (SDR, ESTOI) machinery.
"""

from upitsep.dsp import (
    ComplexSpectrogram,
    MagnitudeSpectrogram,
    PhaseSpectrogram,
    StftConfig,
    Waveform,
    apply_mask,
    inverse_stft,
    magnitude,
    phase,
    stft,
)
from upitsep.levels import NoActiveSpeechError, active_speech_level
from upitsep.losses import (
    ipsf_mask,
    pit_frame_loss,
    psa_loss_frame,
    psa_target,
    upit_loss,
    upit_loss_gradient,
    upit_permutation,
)
from upitsep.blstm import (
    BlstmConfig,
    BlstmNetwork,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from upitsep.metrics import EvalResult, estoi, sdr
from upitsep.mixing import MixtureExample, add_noise_at_snr, add_silent_speaker, mix_speakers
from upitsep.noise import gen_bbl, gen_ssn, lpc_fit, partition_noise
from upitsep.presets import PRESETS, Preset, get_preset
from upitsep.training import (
    NumericTrainingError,
    TrainSchedule,
    oracle_separate,
    prepare_utterance,
    separate,
    train,
)

__all__ = [
    "BlstmConfig",
    "BlstmNetwork",
    "ComplexSpectrogram",
    "EvalResult",
    "MagnitudeSpectrogram",
    "MixtureExample",
    "NoActiveSpeechError",
    "NumericTrainingError",
    "PRESETS",
    "PhaseSpectrogram",
    "Preset",
    "StftConfig",
    "TrainSchedule",
    "Waveform",
    "active_speech_level",
    "add_noise_at_snr",
    "add_silent_speaker",
    "apply_mask",
    "estoi",
    "gen_bbl",
    "gen_ssn",
    "get_preset",
    "inverse_stft",
    "ipsf_mask",
    "load_checkpoint",
    "lpc_fit",
    "magnitude",
    "mix_speakers",
    "oracle_separate",
    "parameter_count",
    "partition_noise",
    "phase",
    "pit_frame_loss",
    "prepare_utterance",
    "psa_loss_frame",
    "psa_target",
    "save_checkpoint",
    "sdr",
    "separate",
    "stft",
    "train",
    "upit_loss",
    "upit_loss_gradient",
    "upit_permutation",
]

__version__ = "0.1.0"
