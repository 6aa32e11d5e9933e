"""Session fixtures for the acceptance suite, plus its pass/fail summary.

The desk workspace (corpus -> catalog -> noise -> mixtures -> trained
model) is expensive, so it is built once per session and shared by the
acceptance criteria. Every criterion reports one PASS/FAIL line; the
lines are echoed in the terminal summary.
"""

import time

import pytest

from upitsep.cli import main as cli
from upitsep.demo import make_demo_corpus

DESK_SEED = 0
DESK_SPEAKERS = 12
DESK_UTTERANCES_PER_SPEAKER = 12

_acceptance_lines: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    """Log one acceptance line; assert afterwards so the line always lands."""
    line = f"{name} {'PASS' if passed else 'FAIL'}: {detail}"
    _acceptance_lines.append(line)
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def run_cli(argv) -> None:
    argv = [str(a) for a in argv]
    code = cli(argv)
    assert code == 0, f"command failed with exit {code}: {' '.join(argv)}"


def build_desk_dataset(root, seed=DESK_SEED) -> None:
    """Corpus, catalog, ssn+bbl banks, and the 200/40/40 mixture set."""
    make_demo_corpus(
        root / "corpus",
        n_speakers=DESK_SPEAKERS,
        utterances_per_speaker=DESK_UTTERANCES_PER_SPEAKER,
        seed=seed,
    )
    run_cli(
        [
            "make-catalog",
            "--corpus", root / "corpus",
            "--out", root / "catalog.jsonl",
            "--validation-speakers", 3,
            "--test-speakers", 3,
            "--seed", seed,
        ]
    )
    run_cli(
        [
            "synth-noise",
            "--corpus", root / "catalog.jsonl",
            "--out", root / "noise",
            "--preset", "desk",
            "--seed", seed,
        ]
    )
    run_cli(
        [
            "make-mixtures",
            "--catalog", root / "catalog.jsonl",
            "--noise", root / "noise",
            "--out", root / "data",
            "--preset", "desk",
            "--seed", seed,
        ]
    )


def train_desk_model(root, out_name="desk.ckpt", seed=DESK_SEED) -> None:
    run_cli(
        [
            "train",
            "--data", root / "data",
            "--out", root / out_name,
            "--preset", "desk",
            "--seed", seed,
        ]
    )


@pytest.fixture(scope="session")
def desk_workspace(tmp_path_factory):
    """Fully built desk experiment; `timings` holds per-stage wall seconds."""
    root = tmp_path_factory.mktemp("deskws")
    timings = {}
    t0 = time.perf_counter()
    build_desk_dataset(root)
    timings["dataset"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    train_desk_model(root)
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    run_cli(
        [
            "evaluate",
            "--data", root / "data",
            "--out", root / "report",
            "--model", f"desk={root / 'desk.ckpt'}",
            "--oracle",
        ]
    )
    timings["evaluate"] = time.perf_counter() - t0
    return {"root": root, "timings": timings}
