#!/usr/bin/env python3
"""Generate the synthetic vowel-babble demo corpus used by the desk experiment."""

import argparse
from pathlib import Path

from upitsep.demo import make_demo_corpus


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True, help="corpus root to create")
    parser.add_argument("--speakers", type=int, default=12)
    parser.add_argument("--utterances", type=int, default=12, help="per speaker")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    paths = make_demo_corpus(
        args.out,
        n_speakers=args.speakers,
        utterances_per_speaker=args.utterances,
        seed=args.seed,
    )
    print(f"wrote {len(paths)} utterances under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
