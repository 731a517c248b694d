#!/usr/bin/env python3
"""End-to-end demonstration on a synthetic corpus.

Generates a seeded corpus, runs the full pipeline against the fixture
backend (expected: every check passes, exit 0), then corrupts fifty amounts
and runs again (expected: exit 2 with the failure locations pointing at the
corrupted pages). Artifacts land under the chosen working directory.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ledgerlift.cli import PipelineConfig, run_all
from ledgerlift.core import UnitContext
from ledgerlift.synth import (
    CorpusSpec,
    ErrorKind,
    generate_corpus,
    inject_errors,
    write_corpus,
    write_ledger,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=2021)
    parser.add_argument("--majors", type=int, default=8)
    parser.add_argument("--pages", type=int, default=200)
    parser.add_argument("--errors", type=int, default=50)
    parser.add_argument("--workdir", type=Path, default=Path("demo_out"))
    args = parser.parse_args()

    spec = CorpusSpec(
        seed=args.seed,
        major_heads=args.majors,
        fanout=(3, 4),
        pages=args.pages,
        unit=UnitContext.THOUSAND,
    )
    corpus = generate_corpus(spec)
    print(f"generated {len(corpus.pages)} pages, seed {spec.seed}")

    clean_dir = write_corpus(corpus, args.workdir / "corpus_clean")
    outcome = run_all(
        PipelineConfig(
            manifest=clean_dir / "manifest.tsv",
            backend="fixture",
            fixtures=clean_dir / "fixtures",
            unit=spec.unit,
            out=args.workdir / "run_clean",
            volume="Synthetic",
        )
    )
    print(f"clean run exit code: {outcome.exit_code} (expected 0)")
    print((args.workdir / "run_clean" / "report" / "table1.csv").read_text())

    corrupted, ledger = inject_errors(corpus, [ErrorKind.DIGIT_PERTURB], args.errors, seed=7)
    bad_dir = write_corpus(corrupted, args.workdir / "corpus_corrupt")
    write_ledger(ledger, bad_dir / "ledger.csv")
    outcome = run_all(
        PipelineConfig(
            manifest=bad_dir / "manifest.tsv",
            backend="fixture",
            fixtures=bad_dir / "fixtures",
            unit=spec.unit,
            out=args.workdir / "run_corrupt",
            volume="Synthetic",
        )
    )
    print(f"corrupted run exit code: {outcome.exit_code} (expected 2)")
    failures = (args.workdir / "run_corrupt" / "validate" / "failures.txt").read_text()
    blocks = failures.strip().split("\n\n")
    print(f"{len(blocks)} failure blocks; first one:\n")
    print(blocks[0])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
