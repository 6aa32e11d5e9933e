#!/usr/bin/env python3
"""Run the desk-scale pipeline end to end: corpus, noise, mixtures, training, report.

Everything lands under --work:

    work/corpus/      synthetic utterances
    work/catalog.jsonl
    work/noise/       ssn + bbl banks
    work/data/        mixture dataset
    work/desk.ckpt    trained separator (+ .history.json)
    work/report/      per-condition SDR / ESTOI tables

Each stage is skipped when its output already exists, so a crashed or tuned
run can resume; delete the work dir for a clean slate.
"""

import argparse
import sys
from pathlib import Path

from upitsep.cli import main as cli
from upitsep.demo import make_demo_corpus


def _run(argv: list[str]) -> None:
    code = cli(argv)
    if code != 0:
        raise SystemExit(code)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work", type=Path, required=True, help="working directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--speakers", type=int, default=12)
    parser.add_argument("--utterances", type=int, default=12, help="per speaker")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--epochs", type=int, default=None, help="override the desk preset's budget"
    )
    parser.add_argument("--lr", type=float, default=None)
    args = parser.parse_args(argv)

    work = args.work
    work.mkdir(parents=True, exist_ok=True)

    if not (work / "corpus").is_dir():
        make_demo_corpus(
            work / "corpus",
            n_speakers=args.speakers,
            utterances_per_speaker=args.utterances,
            seed=args.seed,
        )
        print("corpus done", file=sys.stderr)

    if not (work / "catalog.jsonl").is_file():
        _run(
            [
                "make-catalog",
                "--corpus", str(work / "corpus"),
                "--out", str(work / "catalog.jsonl"),
                "--validation-speakers", "3",
                "--test-speakers", "3",
                "--seed", str(args.seed),
            ]
        )

    if not (work / "noise" / "noise.json").is_file():
        _run(
            [
                "synth-noise",
                "--corpus", str(work / "catalog.jsonl"),
                "--out", str(work / "noise"),
                "--preset", "desk",
                "--seed", str(args.seed),
            ]
        )

    if not (work / "data" / "manifest.jsonl").is_file():
        _run(
            [
                "make-mixtures",
                "--catalog", str(work / "catalog.jsonl"),
                "--noise", str(work / "noise"),
                "--out", str(work / "data"),
                "--preset", "desk",
                "--seed", str(args.seed),
            ]
        )

    if not (work / "desk.ckpt").is_file():
        train_args = [
            "train",
            "--data", str(work / "data"),
            "--out", str(work / "desk.ckpt"),
            "--preset", "desk",
            "--seed", str(args.seed),
            "--workers", str(args.workers),
        ]
        if args.epochs is not None:
            train_args += ["--epochs", str(args.epochs)]
        if args.lr is not None:
            train_args += ["--lr", str(args.lr)]
        _run(train_args)

    _run(
        [
            "evaluate",
            "--data", str(work / "data"),
            "--out", str(work / "report"),
            "--model", f"desk={work / 'desk.ckpt'}",
            "--oracle",
            "--workers", str(args.workers),
        ]
    )
    print((work / "report" / "report.txt").read_text())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
