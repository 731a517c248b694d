"""Acceptance gate: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside pytest's own pass/fail output.
"""

import json
import time
from contextlib import contextmanager

import pytest

from _oracles import all_trees, mapping_ted
from conftest import corpus_extracts
from ledgerlift.cleaner import RepairKind, clean_table, realign_row
from ledgerlift.cli import PipelineConfig, run_all
from ledgerlift.core import ARCHETYPES, UnitContext, serialize_fields, split_fields
from ledgerlift.extraction import FixtureBackend, accumulate_usage, extract_document
from ledgerlift.ingest import PageImage
from ledgerlift.synth import (
    CorpusSpec,
    ErrorKind,
    generate_corpus,
    inject_errors,
    write_corpus,
    write_ledger,
)
from ledgerlift.teds import StructureScore, ordered_ted, structural_accuracy
from ledgerlift.validation import (
    CheckResult,
    ColumnMatch,
    FAIL,
    PASS,
    failure_report,
    pass_rate,
)

# Seed-pinned corpus every end-to-end criterion runs against.
CORPUS_SPEC = CorpusSpec(
    seed=2021, major_heads=8, fanout=(3, 4), pages=200, unit=UnitContext.THOUSAND
)


@contextmanager
def criterion(number: int, title: str, budget_s: float):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        elapsed = time.monotonic() - start
        print(f"[ACCEPTANCE] {number}. {title}: FAIL ({elapsed:.1f}s)")
        raise
    elapsed = time.monotonic() - start
    ok = elapsed < budget_s
    verdict = "PASS" if ok else "FAIL"
    print(f"[ACCEPTANCE] {number}. {title}: {verdict} ({elapsed:.1f}s, budget {budget_s:.0f}s)")
    assert ok, f"{title}: {elapsed:.1f}s exceeded the {budget_s:.0f}s budget"


@pytest.fixture(scope="module")
def pinned_corpus():
    return generate_corpus(CORPUS_SPEC)


def test_criterion_1_ted_oracle_equivalence():
    with criterion(1, "TED equals exhaustive mapping oracle (<=4 nodes, 2 labels)", 60):
        trees = all_trees(4, "AB")
        assert len(trees) == 102  # 1+1+2+5 shapes, 2^n labelings each
        checked = 0
        for a in trees:
            for b in trees:
                assert ordered_ted(a, b) == mapping_ted(a, b)
                checked += 1
        assert checked == 102 * 102


# The full reference table of (checks, passed, printed percent) rows.
REFERENCE_ROWS = [
    (374, 317, 85), (154, 146, 95), (528, 463, 88),
    (337, 284, 84), (126, 118, 94), (463, 402, 87),
    (199, 149, 75), (90, 84, 93), (289, 233, 81),
    (189, 147, 78), (60, 59, 98), (249, 206, 83),
    (275, 203, 74), (115, 113, 98), (390, 316, 81),
    (99, 79, 80), (56, 55, 98), (155, 134, 86),
    (161, 125, 78), (76, 73, 96), (237, 198, 84),
    (2311, 1952, 84),
]


def _results(checks: int, passed: int) -> list[CheckResult]:
    columns = ("Accounts_2018_19", "Budget_2019_20", "Revised_2019_20", "Budget_2020_21")
    out = []
    for i in range(checks):
        status = PASS if i < passed else FAIL
        matches = tuple(
            ColumnMatch(column=c, verdict=status, expected=0, actual=0) for c in columns
        )
        out.append(
            CheckResult(
                major_head="0000",
                description="",
                page=1,
                status=status,
                matches=matches,
                check_type="ObjectDetailed",
            )
        )
    return out


def test_criterion_2_pass_rate_reference_table():
    with criterion(2, "pass_rate reproduces every reference percent", 1):
        for checks, passed, expected in REFERENCE_ROWS:
            assert pass_rate(_results(checks, passed)) == expected


def test_criterion_3_structural_accuracy_format():
    with criterion(3, "structural accuracy two-decimal formula", 1):
        def scores(zero, total):
            from fractions import Fraction

            return [
                StructureScore("0000", ("A", "B"), ted=0 if i < zero else 1,
                               nted=Fraction(0 if i < zero else 1, 2))
                for i in range(total)
            ]

        assert structural_accuracy(scores(20, 21)) == 95.24
        assert structural_accuracy(scores(14, 19)) == 73.68


def test_criterion_4_clean_corpus_end_to_end(pinned_corpus, tmp_path):
    with criterion(4, "200-page clean corpus: all checks pass, exit 0", 120):
        corpus_dir = write_corpus(pinned_corpus, tmp_path / "corpus")
        config = PipelineConfig(
            manifest=corpus_dir / "manifest.tsv",
            backend="fixture",
            fixtures=corpus_dir / "fixtures",
            unit=CORPUS_SPEC.unit,
            out=tmp_path / "run",
            volume="Pinned",
        )
        outcome = run_all(config)
        assert outcome.exit_code == 0, outcome

        summary = (tmp_path / "run" / "validate" / "summary.csv").read_text().splitlines()
        rates = {line.split(",")[0]: line.split(",")[1:] for line in summary[1:]}
        assert rates["ObjectDetailed"][0] == rates["ObjectDetailed"][1]  # checks == passed
        assert rates["TwoSourceMinor"][0] == rates["TwoSourceMinor"][1]
        assert rates["Overall"][2] == "100"

        scores = json.loads((tmp_path / "run" / "teds" / "scores.json").read_text())
        assert scores and all(s["nted"] == 0 for s in scores)


def _level_codes(line: str) -> tuple[str, ...]:
    cells = [c.strip() for c in split_fields(line)]
    level = cells[2:8]
    filled = [i for i, c in enumerate(level) if c]
    return tuple(level[: filled[-1] + 1]) if filled else ()


def test_criterion_5_sensitivity_and_localization(pinned_corpus, tmp_path):
    with criterion(5, "50 perturbations: FAIL pages cover ledger, no stray FAILs, exit 2", 120):
        corrupted, ledger = inject_errors(
            pinned_corpus, [ErrorKind.DIGIT_PERTURB], 50, seed=7
        )
        assert len(ledger) == 50
        corpus_dir = write_corpus(corrupted, tmp_path / "corrupt")
        write_ledger(ledger, corpus_dir / "ledger.csv")
        config = PipelineConfig(
            manifest=corpus_dir / "manifest.tsv",
            backend="fixture",
            fixtures=corpus_dir / "fixtures",
            unit=CORPUS_SPEC.unit,
            out=tmp_path / "run",
            volume="Pinned",
        )
        outcome = run_all(config)
        assert outcome.exit_code == 2, outcome

        records = json.loads(
            (tmp_path / "run" / "validate" / "results.json").read_text()
        )["checks"]
        failed = [r for r in records if r["Status"] == FAIL]

        # every corrupted page appears among the reported failure locations
        ledger_pages = {e.page for e in ledger}
        fail_pages = {r["Page"] for r in failed}
        assert ledger_pages <= fail_pages, sorted(ledger_pages - fail_pages)

        # and no check outside the perturbed subtrees flipped
        affected_detailed = set()
        affected_minor = set()
        for entry in ledger:
            path = _level_codes(entry.original)
            if len(path) >= 5:
                affected_detailed.add(path[:5])
            affected_minor.add(path[:3])
        for record in failed:
            path = tuple(record["Code_Path"])
            if record["Check_Type"] == "ObjectDetailed":
                assert path in affected_detailed, record
            else:
                assert path in affected_minor, record


def test_criterion_6_cleaner_restores_injected_misalignments(pinned_corpus):
    with criterion(6, "all DescriptionSplit/MissingCodeCell repairs byte-exact", 60):
        corrupted, ledger = inject_errors(
            pinned_corpus,
            [ErrorKind.DESCRIPTION_SPLIT, ErrorKind.MISSING_CODE_CELL],
            40,
            seed=13,
        )
        assert len(ledger) == 40
        pages = {p.number: p for p in corrupted.pages}

        # byte-exact inverse of every corruption, one by one
        for entry in ledger:
            archetype = ARCHETYPES[pages[entry.page].archetype]
            repaired, kind, _ = realign_row(split_fields(entry.corrupted), archetype)
            assert serialize_fields(repaired) == entry.original
            assert kind in (RepairKind.MERGE_DESCRIPTION, RepairKind.INSERT_EMPTY_CODE)

        # whole-corpus clean: repair log location-for-location equals the ledger
        kind_map = {
            ErrorKind.DESCRIPTION_SPLIT: RepairKind.MERGE_DESCRIPTION,
            ErrorKind.MISSING_CODE_CELL: RepairKind.INSERT_EMPTY_CODE,
        }
        repairs = []
        for extract in corpus_extracts(corrupted):
            result = clean_table(extract, CORPUS_SPEC.unit)
            assert not result.quarantined
            repairs.extend(result.repair_log())
        got = sorted((a.page, a.raw_line_index, a.kind) for a in repairs)
        want = sorted((e.page, e.line, kind_map[e.error_kind]) for e in ledger)
        assert got == want

        # cleaned rows equal the rows cleaned from the pristine corpus
        clean_rows = {}
        for extract in corpus_extracts(pinned_corpus):
            for name, rows in clean_table(extract, CORPUS_SPEC.unit).rows_by_archetype.items():
                clean_rows.setdefault(name, []).extend(rows)
        repaired_rows = {}
        for extract in corpus_extracts(corrupted):
            for name, rows in clean_table(extract, CORPUS_SPEC.unit).rows_by_archetype.items():
                repaired_rows.setdefault(name, []).extend(rows)
        assert repaired_rows == clean_rows


EXPECTED_BLOCK = (
    "Major_Head             2039\n"
    "Description            Total 09\n"
    "Page                   3\n"
    "Status                 FAIL\n"
    "Accounts_2018_19_Match PASS\n"
    "Budget_2019_20_Match   FAIL\n"
    "Revised_2019_20_Match  FAIL\n"
    "Budget_2020_21_Match   PASS\n"
)


def test_criterion_7_failure_block_byte_format():
    with criterion(7, "failure block renders byte-identically", 1):
        verdicts = (PASS, FAIL, FAIL, PASS)
        columns = ("Accounts_2018_19", "Budget_2019_20", "Revised_2019_20", "Budget_2020_21")
        result = CheckResult(
            major_head="2039",
            description="Total 09",
            page=3,
            status=FAIL,
            matches=tuple(
                ColumnMatch(column=c, verdict=v, expected=0, actual=0)
                for c, v in zip(columns, verdicts)
            ),
            check_type="ObjectDetailed",
        )
        assert failure_report([result]) == EXPECTED_BLOCK


VOLUME_1_TOTALS = (1567223, 1898941, 443077)
VOLUME_1_PAGES = 227


def test_criterion_8_token_accounting(tmp_path):
    with criterion(8, "usage accumulation reproduces the volume totals", 60):
        fixtures = tmp_path / "fixtures"
        fixtures.mkdir()
        import hashlib

        per_column = []
        for total in VOLUME_1_TOTALS:
            base, remainder = divmod(total, VOLUME_1_PAGES)
            per_column.append(
                [base + (1 if i < remainder else 0) for i in range(VOLUME_1_PAGES)]
            )
        pages = []
        for number, usage in enumerate(zip(*per_column), start=1):
            image = f"volume1 page {number}".encode()
            path = tmp_path / f"p{number}.img"
            path.write_bytes(image)
            digest = hashlib.sha256(image).hexdigest()
            (fixtures / f"{digest}.txt").write_text(
                f"# usage: {usage[0]} {usage[1]} {usage[2]}\nNO_TABLES\n"
            )
            pages.append(PageImage(number, str(path), 300, "Portrait"))

        extracts = extract_document(pages, "prompt", FixtureBackend(fixtures))
        total = accumulate_usage([e.usage for e in extracts])
        assert total.as_tuple() == VOLUME_1_TOTALS
