"""Command-line front end for the whole pipeline.

Subcommands cover catalog construction, noise synthesis, mixture
materialization, training, separation, and evaluation (model, oracle, or
both). Progress goes to stderr; machine-readable results go to stdout or
into files. Every produced manifest carries the resolved configuration so
a run can be reproduced from its outputs alone.

Option precedence, lowest to highest: preset defaults, then a JSON config
file (``--config``), then explicit command-line flags.

Exit codes: 0 success, 2 usage or bad configuration, 3 missing input
file/directory, 4 numeric failure during training.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path

from upitsep.blstm import BlstmConfig, BlstmNetwork, load_checkpoint, save_checkpoint
from upitsep.corpus import (
    DatasetPlan,
    MixtureRecipe,
    NoiseBank,
    build_catalog,
    build_manifest,
    build_noise_bank,
    load_catalog,
    load_example,
    load_manifest,
    load_noise_bank,
    materialize,
    read_wav,
    save_catalog,
    save_manifest,
    save_noise_manifest,
    write_wav,
)
from upitsep.dsp import StftConfig
from upitsep.metrics import aggregate, evaluate_outputs
from upitsep.presets import (
    RECORDED_NOISE_TYPES,
    SYNTHESIZABLE_NOISE_TYPES,
    Preset,
    get_preset,
)
from upitsep.training import (
    NumericTrainingError,
    TrainSchedule,
    oracle_separate,
    prepare_utterance,
    separate,
    train,
)

EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_NUMERIC = 4

ORACLE_MODEL_ID = "ipsf"


class MissingInputError(FileNotFoundError):
    """A required input path does not exist."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved invocation: what ran, on which paths, with which knobs."""

    subcommand: str
    paths: dict
    preset: str | None
    seed: int
    overrides: dict
    workers: int = 1

    def as_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "paths": {k: str(v) for k, v in sorted(self.paths.items())},
            "preset": self.preset,
            "seed": self.seed,
            "overrides": dict(sorted(self.overrides.items())),
            "workers": self.workers,
        }


def _log(msg: str) -> None:
    print(f"[upitsep] {msg}", file=sys.stderr, flush=True)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _require(path: Path, what: str) -> Path:
    if not Path(path).exists():
        raise MissingInputError(f"{what} not found: {path}")
    return Path(path)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(_require(Path(path), "config file")) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return cfg

def _resolve(args, file_cfg: dict, knobs: tuple) -> tuple:
    """Apply precedence (flags > config file > preset) for the named knobs.

    Returns (preset | None, overrides dict). An override appears only when
    it differs from the preset-or-builtin default layer.
    """
    preset_name = getattr(args, "preset", None) or file_cfg.get("preset")
    preset = get_preset(preset_name) if preset_name else None
    unknown = set(file_cfg) - set(knobs) - {"preset", "seed", "workers"}
    if unknown:
        raise ValueError(f"config file keys not understood here: {sorted(unknown)}")
    overrides = {}
    for name in knobs:
        flag = getattr(args, name, None)
        if flag is not None:
            overrides[name] = flag
        elif name in file_cfg:
            overrides[name] = file_cfg[name]
    return preset, overrides


def _resolve_seed(args, file_cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(file_cfg.get("seed", 0))


def _resolve_workers(args, file_cfg: dict) -> int:
    w = args.workers if getattr(args, "workers", None) is not None else file_cfg.get("workers", 1)
    if w < 1:
        raise ValueError(f"--workers must be >= 1, got {w}")
    return int(w)


def _pmap(fn, items, workers: int) -> list:
    """Map preserving order; optionally across processes.

    Ordered reduction keeps every downstream artifact independent of the
    worker count.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _load_catalog_arg(path: Path):
    """Accept either a catalog file or a raw corpus directory."""
    path = _require(path, "corpus")
    if path.is_dir():
        return build_catalog(path)
    return load_catalog(path)


# ---------------------------------------------------------------------------
# make-catalog


def cmd_make_catalog(args) -> int:
    file_cfg = _load_config_file(args.config)
    _, overrides = _resolve(args, file_cfg, ("validation_speakers", "test_speakers"))
    seed = _resolve_seed(args, file_cfg)
    root = _require(Path(args.corpus), "corpus directory")
    split_counts = None
    if "validation_speakers" in overrides or "test_speakers" in overrides:
        n = len([d for d in root.iterdir() if d.is_dir()])
        n_val = int(overrides.get("validation_speakers", max(1, n // 6)))
        n_test = int(overrides.get("test_speakers", max(1, n // 6)))
        split_counts = (n - n_val - n_test, n_val, n_test)
    catalog = build_catalog(root, seed=seed, split_counts=split_counts)
    run = RunConfig(
        subcommand="make-catalog",
        paths={"corpus": root, "out": args.out},
        preset=None,
        seed=seed,
        overrides=overrides,
    )
    save_catalog(catalog, args.out, run_config=run.as_dict())
    _log(
        f"catalog: {len(catalog.entries)} utterances, "
        f"{len(catalog.speakers('train'))}/{len(catalog.speakers('validation'))}/"
        f"{len(catalog.speakers('test'))} train/validation/test speakers"
    )
    _emit({"catalog": str(args.out), "entries": len(catalog.entries)})
    return 0


# ---------------------------------------------------------------------------
# synth-noise


def cmd_synth_noise(args) -> int:
    file_cfg = _load_config_file(args.config)
    preset, overrides = _resolve(
        args, file_cfg, ("ssn_sentences", "ssn_duration_s", "bbl_groups")
    )
    seed = _resolve_seed(args, file_cfg)
    catalog = _load_catalog_arg(Path(args.corpus))
    out_dir = Path(args.out)

    types = tuple(args.type) if args.type else (preset.noise_types if preset else ())
    if not types:
        raise ValueError("no noise type requested: pass --type or --preset")
    recorded = {}
    for spec_item in args.file or ():
        kind, _, p = spec_item.partition("=")
        if not p:
            raise ValueError(f"--file expects TYPE=PATH, got {spec_item!r}")
        recorded[kind] = _require(Path(p), f"recorded noise file for {kind!r}")
    for kind in types:
        if kind in RECORDED_NOISE_TYPES and kind not in recorded:
            raise ValueError(
                f"noise type {kind!r} is a recording; supply it with --file {kind}=PATH"
            )

    def knob(name):
        if name in overrides:
            return overrides[name]
        if preset is not None:
            return getattr(preset, name)
        return getattr(Preset.__dataclass_fields__[name], "default")

    bank = build_noise_bank(
        catalog,
        out_dir,
        noise_types=types,
        seed=seed,
        ssn_sentences=int(knob("ssn_sentences")),
        ssn_duration_s=float(knob("ssn_duration_s")),
        bbl_groups=int(knob("bbl_groups")),
        recorded_files=recorded,
    )
    manifest_path = out_dir / "noise.json"
    if manifest_path.exists():
        # Accumulate: a second invocation adds types to the same bank.
        existing = load_noise_bank(manifest_path)
        merged = dict(existing.refs)
        merged.update(bank.refs)
        bank = NoiseBank(merged, out_dir)
    run = RunConfig(
        subcommand="synth-noise",
        paths={"corpus": args.corpus, "out": out_dir},
        preset=preset.name if preset else None,
        seed=seed,
        overrides={**overrides, "types": list(types)},
    )
    save_noise_manifest(bank, manifest_path, run_config=run.as_dict())
    _log(f"noise bank: {', '.join(bank.ids())} -> {out_dir}")
    _emit({"noise_manifest": str(manifest_path), "types": list(bank.ids())})
    return 0


# ---------------------------------------------------------------------------
# make-mixtures


_PLAN_KNOBS = (
    "train_count",
    "validation_count",
    "test_count",
    "composition",
    "level_offset_range_db",
    "snr_train_range_db",
    "snr_eval_grid_db",
    "append_silent_speaker",
)


def cmd_make_mixtures(args) -> int:
    file_cfg = _load_config_file(args.config)
    preset, overrides = _resolve(args, file_cfg, _PLAN_KNOBS)
    seed = _resolve_seed(args, file_cfg)
    catalog_path = _require(Path(args.catalog), "catalog")
    catalog = load_catalog(catalog_path)
    noise_arg = _require(Path(args.noise), "noise manifest")
    if noise_arg.is_dir():
        noise_arg = _require(noise_arg / "noise.json", "noise manifest")
    bank = load_noise_bank(noise_arg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    plan = preset.plan if preset else DatasetPlan()
    plan_overrides = dict(overrides)
    for key in ("level_offset_range_db", "snr_train_range_db", "snr_eval_grid_db"):
        if key in plan_overrides:
            plan_overrides[key] = tuple(plan_overrides[key])
    plan = replace(plan, **plan_overrides)

    if preset:
        missing = set(preset.noise_types) - set(bank.ids())
        if missing:
            raise ValueError(
                f"preset {preset.name!r} needs noise types {sorted(missing)} "
                f"not present in {noise_arg}"
            )
        bank = NoiseBank(
            {nid: bank.refs[nid] for nid in preset.noise_types}, bank.base_dir
        )

    # Re-anchor noise paths to the dataset dir so the manifest alone can
    # re-materialize the data later.
    rebased = {
        nid: dataclasses.replace(
            ref,
            path=os.path.relpath(
                (bank.base_dir / ref.path).resolve(), out_dir.resolve()
            ),
        )
        for nid, ref in bank.refs.items()
    }
    bank = NoiseBank(rebased, out_dir)

    manifest = build_manifest(
        catalog,
        plan,
        bank,
        seed=seed,
        catalog_path=os.path.relpath(catalog_path.resolve(), out_dir.resolve()),
    )
    run = RunConfig(
        subcommand="make-mixtures",
        paths={"catalog": catalog_path, "noise": noise_arg, "out": out_dir},
        preset=preset.name if preset else None,
        seed=seed,
        overrides=overrides,
        workers=1,
    )
    manifest_path = out_dir / "manifest.jsonl"
    save_manifest(manifest, manifest_path, run_config=run.as_dict())
    _log(f"manifest: {len(manifest.recipes)} recipes -> {manifest_path}")
    materialize(manifest, out_dir, catalog=catalog, noise_bank=bank)
    _log(f"materialized {len(manifest.recipes)} examples under {out_dir}")
    _emit({"dataset": str(out_dir), "recipes": len(manifest.recipes)})
    return 0


# ---------------------------------------------------------------------------
# train


_SCHEDULE_KNOBS = (
    "lr_initial",
    "lr_decay",
    "lr_floor",
    "max_epochs",
    "minibatch_utterances",
    "grad_clip_norm",
)
_NET_KNOBS = ("num_layers", "cells_per_direction", "dropout_rate")


def _prepare_recipe(recipe: MixtureRecipe, base_dir: Path, stft_cfg: StftConfig):
    ex = load_example(recipe, base_dir)
    return prepare_utterance(ex.mixture, ex.sources, stft_cfg, uid=recipe.uid)


def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    preset, overrides = _resolve(args, file_cfg, _SCHEDULE_KNOBS + _NET_KNOBS)
    seed = _resolve_seed(args, file_cfg)
    workers = _resolve_workers(args, file_cfg)
    data_dir = _require(Path(args.data), "dataset directory")
    manifest = load_manifest(_require(data_dir / "manifest.jsonl", "dataset manifest"))

    schedule = preset.schedule if preset else TrainSchedule()
    schedule = replace(
        schedule,
        seed=seed,
        **{k: overrides[k] for k in _SCHEDULE_KNOBS if k in overrides},
    )
    net_cfg = preset.blstm if preset else BlstmConfig()
    net_cfg = replace(net_cfg, **{k: overrides[k] for k in _NET_KNOBS if k in overrides})

    split_recipes = {
        split: [r for r in manifest.recipes if r.split == split]
        for split in ("train", "validation")
    }
    if not split_recipes["train"]:
        raise ValueError("dataset has no train split")
    prep = partial(_prepare_recipe, base_dir=data_dir, stft_cfg=manifest.stft)
    _log(
        f"preparing {len(split_recipes['train'])} train / "
        f"{len(split_recipes['validation'])} validation utterances"
    )
    train_data = _pmap(prep, split_recipes["train"], workers)
    val_data = _pmap(prep, split_recipes["validation"], workers)

    net = BlstmNetwork.initialize(net_cfg, seed=seed)
    _log(
        f"training {net_cfg.num_layers}x{net_cfg.cells_per_direction} "
        f"({net.params.size} parameters), lr {schedule.lr_initial}"
    )
    result = train(net, train_data, schedule, val_data)
    _log(
        f"stopped after {result.epochs_run} epochs ({result.stopped_reason}); "
        f"train loss {result.train_losses[0]:.4f} -> {result.train_losses[-1]:.4f}"
    )

    run = RunConfig(
        subcommand="train",
        paths={"data": data_dir, "out": args.out},
        preset=preset.name if preset else None,
        seed=seed,
        overrides=overrides,
        workers=workers,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    history = {
        "train_losses": result.train_losses,
        "validation_losses": result.validation_losses,
        "learning_rates": result.learning_rates,
        "epochs_run": result.epochs_run,
        "stopped_reason": result.stopped_reason,
        "run_config": run.as_dict(),
    }
    save_checkpoint(net, out, schedule_state=history)
    with open(out.with_suffix(out.suffix + ".history.json"), "w") as f:
        json.dump(history, f, sort_keys=True, indent=1)
        f.write("\n")
    _emit(
        {
            "checkpoint": str(out),
            "epochs_run": result.epochs_run,
            "final_train_loss": result.train_losses[-1],
            "final_validation_loss": (
                result.validation_losses[-1] if result.validation_losses else None
            ),
            "stopped_reason": result.stopped_reason,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# separate


def cmd_separate(args) -> int:
    net, _ = load_checkpoint(_require(Path(args.model), "model checkpoint"))
    mixture = read_wav(_require(Path(args.input), "input WAV"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = separate(net, mixture)
    paths = []
    for i, w in enumerate(outputs, start=1):
        p = out_dir / f"source{i}.wav"
        write_wav(w, p)
        paths.append(str(p))
    _log(f"wrote {len(paths)} streams to {out_dir}")
    _emit({"outputs": paths})
    return 0


# ---------------------------------------------------------------------------
# evaluate / oracle


def _eval_nets(model_specs: tuple) -> dict:
    # Worker-side cache: checkpoints load once per process.
    global _NET_CACHE
    try:
        cache = _NET_CACHE
    except NameError:
        cache = _NET_CACHE = {}
    for name, path in model_specs:
        if name not in cache:
            cache[name] = load_checkpoint(path)[0]
    return cache


def _evaluate_recipe(
    recipe: MixtureRecipe,
    base_dir: Path,
    stft_cfg: StftConfig,
    model_specs: tuple,
    include_oracle: bool,
    metric: str,
    compute_estoi: bool,
) -> list:
    ex = load_example(recipe, base_dir)
    refs = ex.reference_sources
    common = dict(
        num_speakers=recipe.num_speakers,
        snr_db=recipe.snr_db,
        noise_id=recipe.noise_id,
        metric=metric,
        compute_estoi=compute_estoi,
    )
    results = []
    nets = _eval_nets(model_specs)
    for name, _ in model_specs:
        outputs = separate(nets[name], ex.mixture, stft_cfg)
        results.append(
            (recipe.uid, evaluate_outputs(outputs, refs, ex.mixture, model_id=name, **common))
        )
    if include_oracle:
        outputs = oracle_separate(ex.mixture, ex.sources, stft_cfg)
        results.append(
            (
                recipe.uid,
                evaluate_outputs(
                    outputs, refs, ex.mixture, model_id=ORACLE_MODEL_ID, **common
                ),
            )
        )
    return results


def _run_evaluation(args, include_oracle: bool, model_specs: list) -> int:
    file_cfg = _load_config_file(args.config)
    _, overrides = _resolve(args, file_cfg, ("metric", "estoi"))
    seed = _resolve_seed(args, file_cfg)
    workers = _resolve_workers(args, file_cfg)
    metric = overrides.get("metric", "sdr")
    compute_estoi = bool(overrides.get("estoi", True))
    data_dir = _require(Path(args.data), "dataset directory")
    manifest = load_manifest(_require(data_dir / "manifest.jsonl", "dataset manifest"))
    recipes = [r for r in manifest.recipes if r.split == args.split]
    if not recipes:
        raise ValueError(f"dataset has no recipes in split {args.split!r}")

    for _, path in model_specs:
        _require(Path(path), "model checkpoint")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _log(
        f"evaluating {len(recipes)} {args.split} examples: "
        f"{', '.join(name for name, _ in model_specs) or 'no models'}"
        f"{' + oracle' if include_oracle else ''}"
    )
    eval_one = partial(
        _evaluate_recipe,
        base_dir=data_dir,
        stft_cfg=manifest.stft,
        model_specs=tuple((n, str(p)) for n, p in model_specs),
        include_oracle=include_oracle,
        metric=metric,
        compute_estoi=compute_estoi,
    )
    per_recipe = _pmap(eval_one, recipes, workers)
    flat = [pair for chunk in per_recipe for pair in chunk]

    run = RunConfig(
        subcommand="oracle" if include_oracle and not model_specs else "evaluate",
        paths={"data": data_dir, "out": out_dir},
        preset=None,
        seed=seed,
        overrides={
            **overrides,
            "split": args.split,
            "models": [name for name, _ in model_specs],
            "oracle": include_oracle,
        },
        workers=workers,
    )
    results_path = out_dir / "results.jsonl"
    with open(results_path, "w") as f:
        f.write(
            json.dumps(
                {"kind": "eval_results", "run_config": run.as_dict()}, sort_keys=True
            )
            + "\n"
        )
        for uid, res in flat:
            row = dataclasses.asdict(res)
            row["uid"] = uid
            f.write(json.dumps(row, sort_keys=True) + "\n")

    report = aggregate([res for _, res in flat])
    (out_dir / "report.txt").write_text(report.render_text())
    (out_dir / "report.csv").write_text(report.render_csv())
    _log(f"report -> {out_dir / 'report.txt'}")
    _emit(
        {
            "results": str(results_path),
            "report_txt": str(out_dir / "report.txt"),
            "report_csv": str(out_dir / "report.csv"),
            "rows": len(flat),
        }
    )
    return 0


def cmd_evaluate(args) -> int:
    model_specs = []
    for spec_item in args.model or ():
        name, _, path = spec_item.partition("=")
        if not path:
            # Bare path: name the column after the file stem.
            name, path = Path(spec_item).stem, spec_item
        if name == ORACLE_MODEL_ID:
            raise ValueError(f"model name {ORACLE_MODEL_ID!r} is reserved for the oracle")
        model_specs.append((name, path))
    if not model_specs and not args.oracle:
        raise ValueError("nothing to evaluate: pass --model and/or --oracle")
    return _run_evaluation(args, include_oracle=args.oracle, model_specs=model_specs)


def cmd_oracle(args) -> int:
    return _run_evaluation(args, include_oracle=True, model_specs=[])


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, workers: bool = False) -> None:
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--preset", help="named preset (lstm1..lstm7, desk)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    if workers:
        p.add_argument(
            "--workers", type=int, help="parallel workers; results are order-stable"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="upitsep",
        description="Multi-talker separation + denoising pipeline "
        "(mask estimation trained with an utterance-level permutation-"
        "invariant phase-sensitive loss).",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("make-catalog", help="scan a corpus tree into a catalog")
    p.add_argument("--corpus", required=True, help="root dir: <speaker>/<utt>.wav")
    p.add_argument("--out", required=True, help="catalog file to write (JSONL)")
    p.add_argument("--validation-speakers", type=int, dest="validation_speakers")
    p.add_argument("--test-speakers", type=int, dest="test_speakers")
    _add_common(p)
    p.set_defaults(func=cmd_make_catalog)

    p = sub.add_parser("synth-noise", help="generate and partition noise signals")
    p.add_argument("--corpus", required=True, help="catalog file or corpus dir")
    p.add_argument("--out", required=True, help="output noise directory")
    p.add_argument(
        "--type",
        action="append",
        choices=sorted(SYNTHESIZABLE_NOISE_TYPES + RECORDED_NOISE_TYPES),
        help="noise type (repeatable); default: the preset's set",
    )
    p.add_argument(
        "--file",
        action="append",
        metavar="TYPE=PATH",
        help="recorded noise WAV for a non-synthesizable type (repeatable)",
    )
    p.add_argument("--sentences", type=int, dest="ssn_sentences")
    p.add_argument("--duration", type=float, dest="ssn_duration_s")
    p.add_argument("--groups", type=int, dest="bbl_groups")
    _add_common(p)
    p.set_defaults(func=cmd_synth_noise)

    p = sub.add_parser("make-mixtures", help="sample recipes and materialize WAVs")
    p.add_argument("--catalog", required=True)
    p.add_argument("--noise", required=True, help="noise manifest or its directory")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--train-count", type=int, dest="train_count")
    p.add_argument("--validation-count", type=int, dest="validation_count")
    p.add_argument("--test-count", type=int, dest="test_count")
    p.add_argument(
        "--composition", choices=("two", "three", "combined"), dest="composition"
    )
    _add_common(p)
    p.set_defaults(func=cmd_make_mixtures)

    p = sub.add_parser("train", help="train a mask estimator on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    p.add_argument("--lr", type=float, dest="lr_initial")
    p.add_argument("--lr-decay", type=float, dest="lr_decay")
    p.add_argument("--lr-floor", type=float, dest="lr_floor")
    p.add_argument("--epochs", type=int, dest="max_epochs")
    p.add_argument("--minibatch", type=int, dest="minibatch_utterances")
    p.add_argument("--grad-clip", type=float, dest="grad_clip_norm")
    p.add_argument("--layers", type=int, dest="num_layers")
    p.add_argument("--cells", type=int, dest="cells_per_direction")
    p.add_argument("--dropout", type=float, dest="dropout_rate")
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("separate", help="run a trained model on one mixture WAV")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--input", required=True, help="mixture WAV")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser(
        "evaluate", help="score models (and optionally the oracle) on a split"
    )
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p.add_argument(
        "--model",
        action="append",
        metavar="NAME=CKPT",
        help="model column (repeatable); bare path uses the file stem as name",
    )
    p.add_argument(
        "--oracle",
        action="store_true",
        help="include the ideal-mask upper bound as a column",
    )
    p.add_argument("--metric", choices=("sdr", "estoi"), dest="metric")
    p.add_argument(
        "--no-estoi",
        action="store_const",
        const=False,
        dest="estoi",
        help="skip intelligibility scoring (faster)",
    )
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="score the ideal-mask upper bound on a split")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p.add_argument("--metric", choices=("sdr", "estoi"), dest="metric")
    p.add_argument(
        "--no-estoi", action="store_const", const=False, dest="estoi"
    )
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInputError as e:
        _log(f"error: {e}")
        return EXIT_MISSING_INPUT
    except FileNotFoundError as e:
        _log(f"error: missing input: {e}")
        return EXIT_MISSING_INPUT
    except NumericTrainingError as e:
        _log(f"error: numeric failure: {e}")
        return EXIT_NUMERIC
    except (ValueError, KeyError) as e:
        msg = e.args[0] if e.args else e
        _log(f"error: {msg}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
