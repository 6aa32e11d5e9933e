"""Corpus catalogs, dataset manifests, and WAV plumbing.

A dataset is fully described by three layers of structured text:

* a **catalog** (JSONL) listing every clean utterance with its speaker and
  split — test-split speakers never appear in train/validation;
* a **manifest** (JSONL) binding sampled mixture recipes to catalog ids,
  noise files, and realized gains, so materialization is pure mechanical
  replay — no level measurement happens twice;
* a **checksum index** (JSON) written after materialization, pinning every
  produced WAV to a 64-bit truncated SHA-256.

All audio storage is 16-bit PCM mono; internal processing is float64 with
samples scaled by 1/32768.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from upitsep.dsp import StftConfig, Waveform
from upitsep.mixing import MixtureExample, add_silent_speaker, mix_speakers
from upitsep.noise import partition_noise

MANIFEST_VERSION = 1
CHECKSUM_ALGORITHM = "sha256-64"
PCM_SCALE = 32768.0
CLIP_GUARD_PEAK = 0.99
# |mixture - (sum of sources + noise)| from requantized files: each of the
# S+2 files rounds independently to the 1/32768 grid.
ADDITIVITY_LSB_BUDGET = 1.0

SNR_GRID_DB = (-5.0, 0.0, 5.0, 20.0)


class WavFormatError(ValueError):
    """File is not mono 16-bit PCM WAV."""


class SpeakerOverlapError(ValueError):
    """Test-split speakers leak into train or validation."""


class InsufficientCorpusError(ValueError):
    """Not enough speakers, utterances, or noise to satisfy a plan."""


class ChecksumConflictError(RuntimeError):
    """Re-materialization produced different bytes than the recorded index."""


class AdditivityError(RuntimeError):
    """Stored mixture does not equal the sum of its stored parts."""


# ---------------------------------------------------------------------------
# WAV I/O


def write_wav(waveform: Waveform, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    q = np.round(waveform.samples * PCM_SCALE)
    q = np.clip(q, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(waveform.sample_rate)
        f.writeframes(q.tobytes())


def read_wav(path: str | Path) -> Waveform:
    try:
        with wave.open(str(path), "rb") as f:
            if f.getnchannels() != 1:
                raise WavFormatError(f"{path}: expected mono, got {f.getnchannels()} channels")
            if f.getsampwidth() != 2:
                raise WavFormatError(f"{path}: expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
            if f.getcomptype() != "NONE":
                raise WavFormatError(f"{path}: compressed WAV not supported")
            rate = f.getframerate()
            raw = f.readframes(f.getnframes())
    except wave.Error as e:
        raise WavFormatError(f"{path}: {e}") from e
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Waveform(samples, rate)


def _wav_params(path: Path) -> tuple[int, int]:
    """(num_samples, sample_rate) from the header, validating the format."""
    try:
        with wave.open(str(path), "rb") as f:
            if f.getnchannels() != 1 or f.getsampwidth() != 2 or f.getcomptype() != "NONE":
                raise WavFormatError(f"{path}: not mono 16-bit PCM")
            return f.getnframes(), f.getframerate()
    except wave.Error as e:
        raise WavFormatError(f"{path}: {e}") from e


def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Catalog


@dataclass(frozen=True)
class CatalogEntry:
    uid: str
    speaker_id: str
    path: str  # relative to the catalog file's directory
    num_samples: int
    sample_rate: int
    split: str


@dataclass(frozen=True)
class CorpusCatalog:
    root: Path
    entries: tuple
    seed: int

    def __post_init__(self):
        test_speakers = {e.speaker_id for e in self.entries if e.split == "test"}
        other = {e.speaker_id for e in self.entries if e.split != "test"}
        leaked = test_speakers & other
        if leaked:
            raise SpeakerOverlapError(
                f"test speakers also present in train/validation: {sorted(leaked)}"
            )

    def split_entries(self, split: str) -> tuple:
        return tuple(e for e in self.entries if e.split == split)

    def speakers(self, split: str) -> tuple:
        return tuple(sorted({e.speaker_id for e in self.split_entries(split)}))

    def utterances_of(self, speaker_id: str, split: str) -> tuple:
        return tuple(
            e for e in self.split_entries(split) if e.speaker_id == speaker_id
        )

    def entry(self, uid: str) -> CatalogEntry:
        for e in self.entries:
            if e.uid == uid:
                return e
        raise KeyError(f"unknown utterance id {uid!r}")

    def wav_path(self, uid: str) -> Path:
        return self.root / self.entry(uid).path

    def validate_files(self) -> None:
        """Every referenced file exists and decodes as mono 16-bit PCM."""
        for e in self.entries:
            p = self.root / e.path
            if not p.exists():
                raise FileNotFoundError(f"catalog references missing file {p}")
            n, fs = _wav_params(p)
            if n != e.num_samples or fs != e.sample_rate:
                raise WavFormatError(
                    f"{p}: header ({n} samples @ {fs} Hz) disagrees with catalog "
                    f"({e.num_samples} @ {e.sample_rate})"
                )


def build_catalog(
    root: str | Path,
    seed: int = 0,
    split_counts: tuple | None = None,
) -> CorpusCatalog:
    """Scan root/<speaker>/<utterance>.wav and split BY SPEAKER.

    The split is a seeded shuffle of speaker directories, so the test
    speakers are disjoint from train/validation by construction. With
    ``split_counts=None`` roughly 1/6 of speakers go to validation and 1/6
    to test (at least one each).
    """
    root = Path(root)
    speaker_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not speaker_dirs:
        raise InsufficientCorpusError(f"no speaker directories under {root}")
    n = len(speaker_dirs)
    if split_counts is None:
        n_val = max(1, n // 6)
        n_test = max(1, n // 6)
        split_counts = (n - n_val - n_test, n_val, n_test)
    if sum(split_counts) != n or min(split_counts) < 1:
        raise InsufficientCorpusError(
            f"split_counts {split_counts} do not partition {n} speakers"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    split_of = {}
    for rank, idx in enumerate(order):
        if rank < split_counts[0]:
            split_of[speaker_dirs[idx].name] = "train"
        elif rank < split_counts[0] + split_counts[1]:
            split_of[speaker_dirs[idx].name] = "validation"
        else:
            split_of[speaker_dirs[idx].name] = "test"

    entries = []
    for d in speaker_dirs:
        wavs = sorted(d.glob("*.wav"))
        if not wavs:
            raise InsufficientCorpusError(f"speaker directory {d} has no WAV files")
        for w in wavs:
            num, fs = _wav_params(w)
            entries.append(
                CatalogEntry(
                    uid=f"{d.name}/{w.stem}",
                    speaker_id=d.name,
                    path=str(w.relative_to(root)),
                    num_samples=num,
                    sample_rate=fs,
                    split=split_of[d.name],
                )
            )
    return CorpusCatalog(root=root, entries=tuple(entries), seed=seed)


def save_catalog(
    catalog: CorpusCatalog, path: str | Path, run_config: dict | None = None
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "corpus_catalog",
        "version": MANIFEST_VERSION,
        "seed": catalog.seed,
        # Entry paths are relative to this root, itself stored relative to
        # the catalog file so the pair moves together.
        "root": os.path.relpath(catalog.root, path.parent),
        "num_entries": len(catalog.entries),
    }
    if run_config is not None:
        header["run_config"] = run_config
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for e in catalog.entries:
            f.write(json.dumps(dataclasses.asdict(e), sort_keys=True) + "\n")


def load_catalog(path: str | Path) -> CorpusCatalog:
    path = Path(path)
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("kind") != "corpus_catalog":
            raise ValueError(f"{path} is not a corpus catalog")
        entries = tuple(CatalogEntry(**json.loads(line)) for line in f if line.strip())
    root = (path.parent / header.get("root", ".")).resolve()
    return CorpusCatalog(root=root, entries=entries, seed=header["seed"])


# ---------------------------------------------------------------------------
# Noise bank


@dataclass(frozen=True)
class NoiseRef:
    noise_id: str
    path: str  # relative to the manifest directory
    boundaries: tuple  # cumulative (train_end, validation_end, test_end)

    def partition_range(self, split: str) -> tuple:
        a, b, c = self.boundaries
        return {"train": (0, a), "validation": (a, b), "test": (b, c)}[split]


class NoiseBank:
    """Loaded noise waveforms plus their partition boundaries."""

    def __init__(self, refs: dict, base_dir: Path):
        self.refs = dict(refs)
        self.base_dir = Path(base_dir)
        self._cache: dict = {}

    def ids(self) -> tuple:
        return tuple(sorted(self.refs))

    def ref(self, noise_id: str) -> NoiseRef:
        return self.refs[noise_id]

    def waveform(self, noise_id: str) -> Waveform:
        if noise_id not in self._cache:
            self._cache[noise_id] = read_wav(self.base_dir / self.refs[noise_id].path)
        return self._cache[noise_id]


def register_noise_files(paths: dict, base_dir: str | Path) -> NoiseBank:
    """Build a NoiseBank from {noise_id: wav path}, partitioning each 8:1:1."""
    base_dir = Path(base_dir)
    refs = {}
    for noise_id, p in paths.items():
        p = Path(p)
        full = p if p.is_absolute() else base_dir / p
        w = read_wav(full)
        bounds = partition_noise(w).boundaries
        rel = (
            str(full.relative_to(base_dir))
            if full.is_relative_to(base_dir)
            else str(full)
        )
        refs[noise_id] = NoiseRef(noise_id=noise_id, path=rel, boundaries=bounds)
    return NoiseBank(refs, base_dir)


NOISE_FILE_PEAK = 0.95


def build_noise_bank(
    catalog: CorpusCatalog,
    out_dir: str | Path,
    noise_types=("ssn", "bbl"),
    seed: int = 0,
    ssn_sentences: int = 100,
    ssn_duration_s: float = 3000.0,
    bbl_groups: int = 6,
    recorded_files: dict | None = None,
) -> NoiseBank:
    """Synthesize noise from the catalog's train-split speech and register it.

    ``ssn`` and ``bbl`` are generated from the train-split sentences (never
    from held-out speakers); any other requested type must appear in
    ``recorded_files`` as {noise_id: wav path}. Each synthesized signal is
    peak-normalized before storage — recipes carry their own noise gains, so
    the stored level is a free choice made for 16-bit headroom.
    """
    from upitsep.noise import gen_bbl, gen_ssn

    out_dir = Path(out_dir).resolve()
    out_dir.mkdir(parents=True, exist_ok=True)
    recorded_files = dict(recorded_files or {})
    sentences = None
    paths = {}
    for kind in noise_types:
        if kind in recorded_files:
            paths[kind] = Path(recorded_files.pop(kind)).resolve()
            continue
        if kind not in ("ssn", "bbl"):
            raise ValueError(
                f"cannot synthesize noise type {kind!r}; supply it via recorded_files"
            )
        if sentences is None:
            sentences = [
                read_wav(catalog.root / e.path)
                for e in catalog.split_entries("train")
            ]
        if kind == "ssn":
            n = min(ssn_sentences, len(sentences))
            wav, _ = gen_ssn(sentences, n, ssn_duration_s, seed=seed)
        else:
            wav = gen_bbl(sentences, bbl_groups, seed=seed)
        peak = np.max(np.abs(wav.samples))
        scaled = Waveform(wav.samples * (NOISE_FILE_PEAK / peak), wav.sample_rate)
        target = out_dir / f"{kind}.wav"
        write_wav(scaled, target)
        paths[kind] = target
    if recorded_files:
        raise ValueError(f"recorded_files has unused entries: {sorted(recorded_files)}")
    return register_noise_files(paths, out_dir)


def save_noise_manifest(
    bank: NoiseBank, path: str | Path, run_config: dict | None = None
) -> None:
    """Persist a noise bank's refs next to its WAV files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "kind": "noise_manifest",
        "version": MANIFEST_VERSION,
        "noise": {
            nid: dataclasses.asdict(ref) for nid, ref in sorted(bank.refs.items())
        },
    }
    if run_config is not None:
        payload["run_config"] = run_config
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")


def load_noise_bank(path: str | Path) -> NoiseBank:
    """Load a noise manifest; WAV paths resolve against the manifest's dir."""
    path = Path(path)
    with open(path) as f:
        payload = json.load(f)
    if payload.get("kind") != "noise_manifest":
        raise ValueError(f"{path} is not a noise manifest")
    refs = {
        nid: NoiseRef(
            noise_id=d["noise_id"], path=d["path"], boundaries=tuple(d["boundaries"])
        )
        for nid, d in payload["noise"].items()
    }
    return NoiseBank(refs, path.parent)


# ---------------------------------------------------------------------------
# Recipes and manifests


@dataclass(frozen=True)
class MixtureRecipe:
    uid: str
    split: str
    num_speakers: int
    speaker_ids: tuple
    utterance_ids: tuple
    level_offsets_db: tuple  # for speakers 2..n, relative to speaker 1
    silent_speaker_present: bool
    silent_seed: int | None
    noise_id: str
    noise_offset: int
    snr_db: float
    # Realized by finalize_recipes; mechanical replay uses these verbatim.
    gains: tuple | None = None
    noise_gain: float | None = None
    rescale: float = 1.0


@dataclass(frozen=True)
class DatasetPlan:
    train_count: int = 200
    validation_count: int = 40
    test_count: int = 40
    composition: str = "combined"  # "two" | "three" | "combined"
    level_offset_range_db: tuple = (0.0, 5.0)
    snr_train_range_db: tuple = (-5.0, 10.0)
    snr_eval_grid_db: tuple = SNR_GRID_DB
    append_silent_speaker: bool = True

    def __post_init__(self):
        if self.composition not in ("two", "three", "combined"):
            raise ValueError(f"unknown composition {self.composition!r}")
        if min(self.train_count, self.validation_count, self.test_count) < 0:
            raise ValueError("counts must be nonnegative")


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    seed: int
    catalog_path: str
    stft: StftConfig
    noise_refs: dict  # noise_id -> NoiseRef
    recipes: tuple


def _speakers_for_index(plan: DatasetPlan, index: int) -> int:
    if plan.composition == "two":
        return 2
    if plan.composition == "three":
        return 3
    return 2 if index % 2 == 0 else 3


def sample_recipes(
    catalog: CorpusCatalog,
    plan: DatasetPlan,
    noise_bank: NoiseBank,
    seed: int,
) -> tuple:
    """Draw all recipe randomness; gains stay unset until finalize.

    Draw order is fixed (split by split, recipe by recipe) so a seed pins
    the entire manifest. Evaluation recipes take SNR from the fixed grid
    by index arithmetic — snr = grid[k mod V], noise = ids[(k // V) mod T]
    — so every (SNR, noise) cell fills evenly; training recipes draw SNR
    uniformly and rotate noise ids.
    """
    rng = np.random.default_rng(seed)
    noise_ids = noise_bank.ids()
    if not noise_ids:
        raise InsufficientCorpusError("noise bank is empty")
    recipes = []
    counts = {
        "train": plan.train_count,
        "validation": plan.validation_count,
        "test": plan.test_count,
    }
    for split in ("train", "validation", "test"):
        speakers = catalog.speakers(split)
        for k in range(counts[split]):
            n_spk = _speakers_for_index(plan, k)
            if len(speakers) < n_spk:
                raise InsufficientCorpusError(
                    f"{split} split has {len(speakers)} speakers; need {n_spk}"
                )
            chosen = [speakers[i] for i in rng.choice(len(speakers), n_spk, replace=False)]
            utt_ids = []
            for sp in chosen:
                pool = catalog.utterances_of(sp, split)
                utt_ids.append(pool[int(rng.integers(0, len(pool)))].uid)
            offsets = tuple(
                float(rng.uniform(*plan.level_offset_range_db)) for _ in range(n_spk - 1)
            )
            if split == "test":
                grid = plan.snr_eval_grid_db
                snr = float(grid[k % len(grid)])
                noise_id = noise_ids[(k // len(grid)) % len(noise_ids)]
            else:
                snr = float(rng.uniform(*plan.snr_train_range_db))
                noise_id = noise_ids[k % len(noise_ids)]
            mixture_len = max(catalog.entry(u).num_samples for u in utt_ids)
            lo, hi = noise_bank.ref(noise_id).partition_range(split)
            if hi - lo < mixture_len:
                raise InsufficientCorpusError(
                    f"noise {noise_id} {split} partition ({hi - lo} samples) shorter "
                    f"than mixture ({mixture_len})"
                )
            offset = int(rng.integers(lo, hi - mixture_len + 1))
            silent = n_spk == 2 and plan.append_silent_speaker
            silent_seed = int(rng.integers(0, 2**63 - 1)) if silent else None
            recipes.append(
                MixtureRecipe(
                    uid=f"{split}_{k:05d}",
                    split=split,
                    num_speakers=n_spk,
                    speaker_ids=tuple(chosen),
                    utterance_ids=tuple(utt_ids),
                    level_offsets_db=offsets,
                    silent_speaker_present=silent,
                    silent_seed=silent_seed,
                    noise_id=noise_id,
                    noise_offset=offset,
                    snr_db=snr,
                )
            )
    return tuple(recipes)


def _mix_without_noise(recipe: MixtureRecipe, catalog: CorpusCatalog) -> MixtureExample:
    utts = [read_wav(catalog.wav_path(u)) for u in recipe.utterance_ids]
    example = mix_speakers(utts, recipe.level_offsets_db)
    if recipe.silent_speaker_present:
        example = add_silent_speaker(example, recipe.silent_seed)
    return example


def finalize_recipes(recipes, catalog: CorpusCatalog, noise_bank: NoiseBank) -> tuple:
    """Measure levels once and pin realized gains into each recipe."""
    from upitsep.mixing import add_noise_at_snr

    out = []
    for recipe in recipes:
        example = _mix_without_noise(recipe, catalog)
        noise = noise_bank.waveform(recipe.noise_id)
        example = add_noise_at_snr(
            example, noise, recipe.snr_db, offset=recipe.noise_offset
        )
        n = example.num_samples
        noise_scaled = (
            noise.samples[recipe.noise_offset : recipe.noise_offset + n]
            * example.noise_gain
        )
        peak = max(
            float(np.max(np.abs(example.mixture.samples))),
            max(float(np.max(np.abs(s.samples))) for s in example.sources),
            float(np.max(np.abs(noise_scaled))),
        )
        rescale = CLIP_GUARD_PEAK / peak if peak > CLIP_GUARD_PEAK else 1.0
        out.append(
            dataclasses.replace(
                recipe,
                gains=tuple(float(g) for g in example.gains),
                noise_gain=float(example.noise_gain),
                rescale=float(rescale),
            )
        )
    return tuple(out)


def build_manifest(
    catalog: CorpusCatalog,
    plan: DatasetPlan,
    noise_bank: NoiseBank,
    seed: int,
    catalog_path: str = "catalog.jsonl",
    stft: StftConfig | None = None,
) -> DatasetManifest:
    recipes = sample_recipes(catalog, plan, noise_bank, seed)
    recipes = finalize_recipes(recipes, catalog, noise_bank)
    return DatasetManifest(
        version=MANIFEST_VERSION,
        seed=seed,
        catalog_path=catalog_path,
        stft=stft if stft is not None else StftConfig(),
        noise_refs=dict(noise_bank.refs),
        recipes=recipes,
    )


def save_manifest(
    manifest: DatasetManifest, path: str | Path, run_config: dict | None = None
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "dataset_manifest",
        "version": manifest.version,
        "seed": manifest.seed,
        "catalog": manifest.catalog_path,
        "checksum_algorithm": CHECKSUM_ALGORITHM,
        "stft": dataclasses.asdict(manifest.stft),
        "noise": {
            nid: dataclasses.asdict(ref) for nid, ref in sorted(manifest.noise_refs.items())
        },
        "num_recipes": len(manifest.recipes),
    }
    if run_config is not None:
        header["run_config"] = run_config
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for r in manifest.recipes:
            f.write(json.dumps(dataclasses.asdict(r), sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("kind") != "dataset_manifest":
            raise ValueError(f"{path} is not a dataset manifest")
        recipes = []
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            for key in ("speaker_ids", "utterance_ids", "level_offsets_db", "gains"):
                if d.get(key) is not None:
                    d[key] = tuple(d[key])
            recipes.append(MixtureRecipe(**d))
    noise_refs = {
        nid: NoiseRef(
            noise_id=d["noise_id"], path=d["path"], boundaries=tuple(d["boundaries"])
        )
        for nid, d in header["noise"].items()
    }
    return DatasetManifest(
        version=header["version"],
        seed=header["seed"],
        catalog_path=header["catalog"],
        stft=StftConfig(**header["stft"]),
        noise_refs=noise_refs,
        recipes=tuple(recipes),
    )


# ---------------------------------------------------------------------------
# Materialization


def synthesize_example(recipe: MixtureRecipe, catalog: CorpusCatalog, noise_bank: NoiseBank):
    """Mechanical replay of a finalized recipe: stored gains, no measuring.

    Levels were measured exactly once, at finalize time; replay pads the
    clean utterances, applies the recorded gains, regrows the silent third
    channel from its seed, and adds the recorded noise slice. Returns
    (mixture, sources, noise_slice), rescaled by the clip-guard factor.
    """
    if recipe.gains is None or recipe.noise_gain is None:
        raise ValueError(f"recipe {recipe.uid} has not been finalized")
    utts = [read_wav(catalog.wav_path(u)) for u in recipe.utterance_ids]
    fs = utts[0].sample_rate
    if any(u.sample_rate != fs for u in utts):
        raise ValueError(f"recipe {recipe.uid}: mixed sample rates in sources")
    n = max(u.num_samples for u in utts)
    sources = tuple(
        Waveform(np.concatenate([u.samples, np.zeros(n - u.num_samples)]) * g, fs)
        for u, g in zip(utts, recipe.gains)
    )
    example = MixtureExample(
        mixture=Waveform(np.sum([s.samples for s in sources], axis=0), fs),
        sources=sources,
        gains=tuple(recipe.gains),
    )
    if recipe.silent_speaker_present:
        example = add_silent_speaker(example, recipe.silent_seed)
    noise = noise_bank.waveform(recipe.noise_id)
    noise_slice = (
        noise.samples[recipe.noise_offset : recipe.noise_offset + n] * recipe.noise_gain
    )
    mixture = example.mixture.samples + noise_slice
    k = recipe.rescale
    return (
        Waveform(mixture * k, fs),
        [Waveform(s.samples * k, fs) for s in example.sources],
        Waveform(noise_slice * k, fs),
    )


def _example_dir(base: Path, uid: str) -> Path:
    return base / "examples" / uid


def materialize(
    manifest: DatasetManifest,
    out_dir: str | Path,
    catalog: CorpusCatalog | None = None,
    noise_bank: NoiseBank | None = None,
) -> dict:
    """Write every recipe's WAVs and the checksum index; returns the index.

    Re-materializing over an existing index demands byte-identical output;
    any divergence raises ChecksumConflictError naming the offending files.
    """
    out_dir = Path(out_dir)
    if catalog is None:
        catalog = load_catalog(out_dir / manifest.catalog_path)
    if noise_bank is None:
        noise_bank = NoiseBank(manifest.noise_refs, out_dir)

    index = {"algorithm": CHECKSUM_ALGORITHM, "examples": {}}
    for recipe in manifest.recipes:
        mixture, sources, noise_slice = synthesize_example(recipe, catalog, noise_bank)
        d = _example_dir(out_dir, recipe.uid)
        files = {}
        write_wav(mixture, d / "mixture.wav")
        files["mixture.wav"] = file_checksum(d / "mixture.wav")
        for i, s in enumerate(sources, start=1):
            write_wav(s, d / f"source{i}.wav")
            files[f"source{i}.wav"] = file_checksum(d / f"source{i}.wav")
        write_wav(noise_slice, d / "noise.wav")
        files["noise.wav"] = file_checksum(d / "noise.wav")
        index["examples"][recipe.uid] = {"rescale": recipe.rescale, "files": files}

    index_path = out_dir / "checksums.json"
    if index_path.exists():
        old = json.loads(index_path.read_text())
        conflicts = [
            uid
            for uid, entry in index["examples"].items()
            if uid in old.get("examples", {}) and old["examples"][uid] != entry
        ]
        if conflicts:
            raise ChecksumConflictError(
                f"re-materialization changed {len(conflicts)} examples: "
                f"{conflicts[:5]}"
            )
    index_path.write_text(json.dumps(index, sort_keys=True, indent=1) + "\n")
    return index


@dataclass(frozen=True)
class LoadedExample:
    recipe: MixtureRecipe
    mixture: Waveform
    sources: tuple  # includes the silent third channel when present
    noise: Waveform

    @property
    def reference_sources(self) -> tuple:
        """The real (non-silent) sources, for evaluation."""
        return self.sources[: self.recipe.num_speakers]


def load_example(recipe: MixtureRecipe, base_dir: str | Path) -> LoadedExample:
    """Read an example back and re-verify sample-wise additivity.

    The mixture must equal the sum of sources plus noise to within the
    accumulated 16-bit rounding of the separately quantized files.
    """
    d = _example_dir(Path(base_dir), recipe.uid)
    mixture = read_wav(d / "mixture.wav")
    sources = []
    i = 1
    while (d / f"source{i}.wav").exists():
        sources.append(read_wav(d / f"source{i}.wav"))
        i += 1
    noise = read_wav(d / "noise.wav")
    total = np.sum([s.samples for s in sources], axis=0) + noise.samples
    budget = (len(sources) + 2) * ADDITIVITY_LSB_BUDGET / PCM_SCALE
    err = float(np.max(np.abs(mixture.samples - total)))
    if err > budget:
        raise AdditivityError(
            f"{recipe.uid}: mixture deviates from sum of parts by {err:.2e} "
            f"(budget {budget:.2e})"
        )
    return LoadedExample(
        recipe=recipe, mixture=mixture, sources=tuple(sources), noise=noise
    )


def verify_dataset(manifest: DatasetManifest, base_dir: str | Path) -> int:
    """Additivity-check every stored example; returns the number verified."""
    count = 0
    for recipe in manifest.recipes:
        load_example(recipe, base_dir)
        count += 1
    return count
