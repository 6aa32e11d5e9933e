"""Named experiment configurations.

``lstm1``–``lstm7`` mirror the published training-condition matrix: which
dataset composition (two-speaker, three-speaker, or the 50/50 combination)
pairs with which noise-type set, at full scale (3 recurrent layers, 20000
training mixtures, 50 minutes of each noise). ``str`` and ``caf`` are
recorded noise types — the pipeline slices user-supplied WAV files for
those rather than synthesizing them.

``desk`` shrinks every axis so the identical pipeline runs end to end in
minutes on one core: 2 layers x 64 cells, 200/40/40 mixtures, two
synthesizable noise types, and a learning rate sized for the small net
(the full-scale 2e-5-per-sample rate is far too timid for a 64-cell
model on minutes of audio). Dropout is off at this scale: the decay
rule halves the rate whenever the epoch-mean train loss ticks up, and
with dropout on, measurement jitter alone triggers that every few
epochs, collapsing the rate long before the loss has come down.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from upitsep.blstm import BlstmConfig
from upitsep.corpus import DatasetPlan
from upitsep.training import TrainSchedule

SYNTHESIZABLE_NOISE_TYPES = ("ssn", "bbl")
RECORDED_NOISE_TYPES = ("str", "caf")


@dataclass(frozen=True)
class Preset:
    """One complete experiment recipe: network, schedule, dataset, noise."""

    name: str
    description: str
    blstm: BlstmConfig
    schedule: TrainSchedule
    plan: DatasetPlan
    noise_types: tuple
    # Noise-synthesis knobs (consumed by build_noise_bank).
    ssn_sentences: int = 100
    ssn_duration_s: float = 3000.0
    bbl_groups: int = 6

    def __post_init__(self):
        if not self.noise_types:
            raise ValueError("preset needs at least one noise type")
        for kind in self.noise_types:
            if kind not in SYNTHESIZABLE_NOISE_TYPES + RECORDED_NOISE_TYPES:
                raise ValueError(f"unknown noise type {kind!r}")

    @property
    def recorded_noise_types(self) -> tuple:
        return tuple(k for k in self.noise_types if k in RECORDED_NOISE_TYPES)


_FULL_BLSTM = BlstmConfig(num_layers=3, cells_per_direction=1280, dropout_rate=0.5)
_FULL_BLSTM_SMALL = BlstmConfig(num_layers=3, cells_per_direction=896, dropout_rate=0.5)
_FULL_SCHEDULE = TrainSchedule(
    lr_initial=2e-5,
    lr_decay=0.7,
    lr_floor=1e-10,
    max_epochs=200,
    minibatch_utterances=8,
)
_FULL_PLAN = DatasetPlan(
    train_count=20000,
    validation_count=5000,
    test_count=5000,
    composition="combined",
)

_DESK_BLSTM = BlstmConfig(num_layers=2, cells_per_direction=64, dropout_rate=0.0)
_DESK_SCHEDULE = TrainSchedule(
    lr_initial=2e-4,
    lr_decay=0.7,
    lr_floor=1e-10,
    max_epochs=50,
    minibatch_utterances=4,
)
_DESK_PLAN = DatasetPlan(
    train_count=200,
    validation_count=40,
    test_count=40,
    composition="combined",
)


def _full(name: str, description: str, noise_types, **kwargs) -> Preset:
    return Preset(
        name=name,
        description=description,
        blstm=kwargs.pop("blstm", _FULL_BLSTM),
        schedule=_FULL_SCHEDULE,
        plan=kwargs.pop("plan", _FULL_PLAN),
        noise_types=tuple(noise_types),
        **kwargs,
    )


PRESETS: dict = {
    p.name: p
    for p in (
        _full("lstm1", "combined 2+3-speaker mixtures, speech-shaped noise", ("ssn",)),
        _full("lstm2", "combined 2+3-speaker mixtures, babble noise", ("bbl",)),
        _full("lstm3", "combined 2+3-speaker mixtures, street noise", ("str",)),
        _full("lstm4", "combined 2+3-speaker mixtures, cafeteria noise", ("caf",)),
        _full(
            "lstm5",
            "combined 2+3-speaker mixtures, all four noise types",
            ("ssn", "bbl", "str", "caf"),
        ),
        _full(
            "lstm6",
            "two-speaker mixtures only, babble noise, 896-cell layers",
            ("bbl",),
            blstm=_FULL_BLSTM_SMALL,
            plan=replace(_FULL_PLAN, composition="two"),
        ),
        _full(
            "lstm7",
            "three-speaker mixtures only, babble noise",
            ("bbl",),
            plan=replace(_FULL_PLAN, composition="three"),
        ),
        Preset(
            name="desk",
            description="minutes-scale pipeline check: tiny net, tiny dataset",
            blstm=_DESK_BLSTM,
            schedule=_DESK_SCHEDULE,
            plan=_DESK_PLAN,
            noise_types=("ssn", "bbl"),
            ssn_sentences=30,
            ssn_duration_s=120.0,
            bbl_groups=4,
        ),
    )
}


def get_preset(name: str) -> Preset:
    """Look up a preset by name (case-insensitive)."""
    key = name.lower()
    if key not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; known presets: {known}")
    return PRESETS[key]
