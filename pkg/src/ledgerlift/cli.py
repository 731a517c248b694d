"""Pipeline orchestration and the ledgerlift command line.

Each stage is a file-to-file transformation under one run directory, so any
stage can be rerun alone. The end-to-end runner chains the stages, caches
by config digest (a changed upstream stage invalidates everything after
it), and maps the outcome onto the exit-code contract: 0 when every check
passes, 2 when any check fails, 1 on a processing error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shlex
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import click

from . import __version__
from .core import (
    ARCHETYPES,
    CSV_HEADER,
    ExtractedRow,
    HierarchyLevel,
    LedgerliftError,
    SchemaArchetype,
    UnitContext,
    parse_row,
    row_to_fields,
    serialize_fields,
    split_fields,
)
from .cleaner import CleanResult, clean_table, quarantine_lines
from .extraction import (
    BackendAdapter,
    FixtureBackend,
    HttpBackend,
    RawLine,
    RawPageExtract,
    Segment,
    QuarantinedLine,
    TokenUsage,
    accumulate_usage,
    document_structure_profile,
    extract_document,
    generate_extraction_prompt,
    static_prompt,
)
from .hierarchy import (
    FiscalTree,
    build_tree,
    dump_tree,
    group_rows_by_major,
    tree_size,
    truncate_tree,
)
from .ingest import DEFAULT_DPI, MANIFEST_NAME, load_manifest, rasterize
from .synth import CorpusSpec, ErrorKind, generate_corpus, inject_errors, write_corpus, write_ledger
from .teds import StructureScore, score_pair, structural_accuracy
from .validation import (
    CheckResult,
    FAIL,
    OBJECT_DETAILED,
    TWO_SOURCE_MINOR,
    check_object_detailed,
    check_to_record,
    check_two_source,
    failure_report,
    pass_rate,
)

log = logging.getLogger(__name__)

TEDS_PAIRS = (
    ("SubMajorHead", "MinorHead"),
    ("MinorHead", "SubHead"),
    ("SubHead", "DetailedHead"),
    ("DetailedHead", "ObjectHead"),
)


class ConfigError(LedgerliftError, ValueError):
    """The run configuration is unusable; nothing has been started."""


class MissingStageOutput(LedgerliftError, RuntimeError):
    """A report was requested before its inputs exist."""


@dataclass(frozen=True)
class PipelineConfig:
    pdf: Path | None = None
    manifest: Path | None = None
    backend: str = "fixture"
    fixtures: Path | None = None
    prompt: str = "static"  # static | auto | path to a prompt file
    context_rows: int = 20
    unit: UnitContext = UnitContext.UNIT
    tolerance: int = 0
    out: Path = Path("run")
    volume: str = "volume"
    dpi: int = DEFAULT_DPI
    sort_trees: bool = False
    rasterizer: str = ""  # override tool template, e.g. "pdftoppm -jpeg -r {dpi} {pdf} {prefix}"

    def validated(self) -> "PipelineConfig":
        if self.tolerance < 0:
            raise ConfigError("tolerance must be >= 0")
        if self.context_rows < 1:
            raise ConfigError("context_rows must be >= 1")
        if self.pdf is None and self.manifest is None:
            raise ConfigError("either pdf or manifest is required")
        if self.pdf is not None and not Path(self.pdf).is_file():
            raise ConfigError(f"pdf not found: {self.pdf}")
        if self.pdf is None and not Path(self.manifest).is_file():  # type: ignore[arg-type]
            raise ConfigError(f"manifest not found: {self.manifest}")
        if self.backend == "fixture":
            if self.fixtures is None or not Path(self.fixtures).is_dir():
                raise ConfigError(f"fixtures dir not found: {self.fixtures}")
        elif self.backend != "live":
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.prompt not in ("static", "auto") and not Path(self.prompt).is_file():
            raise ConfigError(f"prompt file not found: {self.prompt}")
        return self


_CONFIG_KEYS = {
    "pdf",
    "manifest",
    "backend",
    "fixtures",
    "prompt",
    "context_rows",
    "unit",
    "tolerance",
    "out",
    "volume",
    "dpi",
    "sort_trees",
    "rasterizer",
}


def parse_config_file(path: Path | str) -> dict[str, str]:
    """Read `key = value` lines; blank lines and # comments are ignored."""
    values: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        key, _, value = body.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def config_from_mapping(values: dict[str, str]) -> PipelineConfig:
    kwargs: dict = {}
    for key, raw in values.items():
        if key in ("pdf", "manifest", "fixtures", "out"):
            kwargs[key] = Path(raw)
        elif key in ("context_rows", "tolerance", "dpi"):
            kwargs[key] = int(raw)
        elif key == "unit":
            try:
                kwargs[key] = UnitContext[raw.strip().upper()]
            except KeyError as exc:
                raise ConfigError(f"unknown unit {raw!r}") from exc
        elif key == "sort_trees":
            kwargs[key] = raw.strip().lower() in ("1", "true", "yes")
        else:
            kwargs[key] = raw
    return PipelineConfig(**kwargs)


# ------------------------------------------------------------------- stages


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def stage_rasterize(config: PipelineConfig) -> Path:
    out = _ensure_dir(Path(config.out) / "rasterize")
    kwargs = {}
    if config.rasterizer:
        kwargs["tool"] = tuple(shlex.split(config.rasterizer))
    rasterize(config.pdf, dpi=config.dpi, out_dir=out, **kwargs)  # type: ignore[arg-type]
    return out / MANIFEST_NAME


def _manifest_path(config: PipelineConfig) -> Path:
    if config.manifest is not None:
        return Path(config.manifest)
    return Path(config.out) / "rasterize" / MANIFEST_NAME


def _make_backend(config: PipelineConfig) -> BackendAdapter:
    if config.backend == "fixture":
        return FixtureBackend(config.fixtures)  # type: ignore[arg-type]
    return HttpBackend()


def _resolve_prompt(config: PipelineConfig, backend: BackendAdapter, out: Path) -> str:
    if config.prompt == "static":
        return static_prompt()
    if config.prompt == "auto":
        pages = load_manifest(_manifest_path(config))
        return generate_extraction_prompt(
            document_structure_profile(),
            list(ARCHETYPES.values()),
            pages[:2],
            backend,
            save_path=out / "prompt_used.txt",
        )
    return Path(config.prompt).read_text(encoding="utf-8")


def _extract_to_record(extract: RawPageExtract) -> dict:
    return {
        "page": extract.page,
        "segments": [
            {"archetype": s.archetype, "lines": [[l.number, l.text] for l in s.lines]}
            for s in extract.segments
        ],
        "open_table": (
            [extract.open_table[0], list(extract.open_table[1])]
            if extract.open_table
            else None
        ),
        "usage": list(extract.usage.as_tuple()),
        "quarantined": [[q.number, q.text, q.reason] for q in extract.quarantined],
    }


def _extract_from_record(record: dict) -> RawPageExtract:
    open_table = record.get("open_table")
    return RawPageExtract(
        page=record["page"],
        segments=tuple(
            Segment(s["archetype"], tuple(RawLine(n, t) for n, t in s["lines"]))
            for s in record["segments"]
        ),
        usage=TokenUsage(*record["usage"]),
        open_table=(open_table[0], tuple(open_table[1])) if open_table else None,
        quarantined=tuple(QuarantinedLine(n, t, r) for n, t, r in record["quarantined"]),
    )


def stage_extract(config: PipelineConfig) -> list[RawPageExtract]:
    out = _ensure_dir(Path(config.out) / "extract")
    backend = _make_backend(config)
    prompt = _resolve_prompt(config, backend, out)
    (out / "prompt_used.txt").write_text(prompt, encoding="utf-8")
    pages = load_manifest(_manifest_path(config))
    extracts = extract_document(pages, prompt, backend, context_rows=config.context_rows)

    with (out / "pages.jsonl").open("w", encoding="utf-8") as handle:
        for extract in extracts:
            handle.write(json.dumps(_extract_to_record(extract), sort_keys=True) + "\n")
    reject_lines = [
        f"{e.page}:{q.number}\t{q.text}\n" for e in extracts for q in e.quarantined
    ]
    (out / "quarantine.txt").write_text("".join(reject_lines), encoding="utf-8")
    total = accumulate_usage([e.usage for e in extracts])
    usage = {
        "pages": len(extracts),
        "input_tokens": total.input_tokens,
        "thought_tokens": total.thought_tokens,
        "output_tokens": total.output_tokens,
    }
    (out / "usage.json").write_text(json.dumps(usage, indent=2) + "\n", encoding="utf-8")
    return extracts


def load_extracts(run_dir: Path) -> list[RawPageExtract]:
    path = Path(run_dir) / "extract" / "pages.jsonl"
    if not path.is_file():
        raise MissingStageOutput(f"missing extract output {path}")
    return [
        _extract_from_record(json.loads(line))
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def stage_clean(config: PipelineConfig, extracts: list[RawPageExtract] | None = None) -> CleanResult:
    out = _ensure_dir(Path(config.out) / "clean")
    if extracts is None:
        extracts = load_extracts(Path(config.out))

    merged = CleanResult({}, [], [], [])
    for extract in extracts:
        result = clean_table(extract, config.unit)
        for name, rows in result.rows_by_archetype.items():
            merged.rows_by_archetype.setdefault(name, []).extend(rows)
        merged.actions.extend(result.actions)
        merged.dropped.extend(result.dropped)
        merged.quarantined.extend(result.quarantined)

    for name in ARCHETYPES:
        rows = merged.rows_by_archetype.get(name, [])
        lines = [CSV_HEADER] + [serialize_fields(row_to_fields(r)) for r in rows]
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    log_lines = ["page,line,kind,detail"]
    log_lines += [
        serialize_fields([str(a.page), str(a.raw_line_index), a.kind.value, a.detail])
        for a in merged.repair_log()
    ]
    (out / "repair_log.csv").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    (out / "quarantine.txt").write_text(quarantine_lines(merged.quarantined), encoding="utf-8")
    return merged


def load_rows(csv_path: Path, archetype: SchemaArchetype) -> list[ExtractedRow]:
    """Read one cleaned archetype CSV back into typed rows."""
    rows = []
    lines = Path(csv_path).read_text(encoding="utf-8").splitlines()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = split_fields(line)
        rows.append(
            parse_row(
                fields,
                archetype,
                page=int(fields[0]),
                unit=UnitContext.UNIT,
                line=line_no,
            )
        )
    return rows


def load_all_rows(run_dir: Path) -> dict[str, list[ExtractedRow]]:
    clean_dir = Path(run_dir) / "clean"
    if not clean_dir.is_dir():
        raise MissingStageOutput(f"missing clean output {clean_dir}")
    return {
        name: load_rows(clean_dir / f"{name}.csv", archetype)
        for name, archetype in ARCHETYPES.items()
    }


def stage_build(config: PipelineConfig) -> dict[str, dict[str, FiscalTree]]:
    out = _ensure_dir(Path(config.out) / "build")
    rows = load_all_rows(Path(config.out))
    trees: dict[str, dict[str, FiscalTree]] = {}
    for name, archetype in ARCHETYPES.items():
        tree_dir = _ensure_dir(out / name)
        trees[name] = {}
        for major, major_rows in sorted(group_rows_by_major(rows[name]).items()):
            tree = build_tree(major_rows, archetype, major, sort_by_code=config.sort_trees)
            trees[name][major] = tree
            (tree_dir / f"{major}.txt").write_text(dump_tree(tree), encoding="utf-8")
    return trees


def stage_validate(config: PipelineConfig) -> tuple[list[CheckResult], bool]:
    out = _ensure_dir(Path(config.out) / "validate")
    rows = load_all_rows(Path(config.out))

    object_results: list[CheckResult] = []
    missing = []
    object_rows = rows["ObjectHead"]
    for major, major_rows in sorted(group_rows_by_major(object_rows).items()):
        tree = build_tree(major_rows, ARCHETYPES["ObjectHead"], major, config.sort_trees)
        results, miss = check_object_detailed(tree, config.tolerance)
        object_results.extend(results)
        missing.extend(miss)

    two_source_results = check_two_source(
        HierarchyLevel.MINOR_HEAD,
        table_a=object_rows,
        table_b=rows["MinorHead"],
        tolerance=config.tolerance,
    )
    all_results = object_results + two_source_results

    records = {
        "checks": [check_to_record(r) for r in all_results],
        "missing_totals": [
            {"Major_Head": m.major_head, "Code_Path": list(m.code_path), "Page": m.page}
            for m in missing
        ],
    }
    (out / "results.json").write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
    (out / "failures.txt").write_text(failure_report(all_results), encoding="utf-8")

    summary = ["validation_type,checks,passed,pass_rate"]
    for label, subset in (
        (OBJECT_DETAILED, object_results),
        (TWO_SOURCE_MINOR, two_source_results),
        ("Overall", all_results),
    ):
        if subset:
            passed = sum(1 for r in subset if r.status != FAIL)
            summary.append(f"{label},{len(subset)},{passed},{pass_rate(subset)}")
    (out / "summary.csv").write_text("\n".join(summary) + "\n", encoding="utf-8")

    any_fail = any(r.status == FAIL for r in all_results)
    outcome = {"checks": len(all_results), "any_fail": any_fail}
    (out / "outcome.json").write_text(json.dumps(outcome) + "\n", encoding="utf-8")
    return all_results, any_fail


def stage_teds(config: PipelineConfig) -> list[StructureScore]:
    out = _ensure_dir(Path(config.out) / "teds")
    rows = load_all_rows(Path(config.out))
    scores: list[StructureScore] = []
    for name_a, name_b in TEDS_PAIRS:
        arch_a, arch_b = ARCHETYPES[name_a], ARCHETYPES[name_b]
        grouped_a = group_rows_by_major(rows[name_a])
        grouped_b = group_rows_by_major(rows[name_b])
        if not grouped_a or not grouped_b:
            # a whole table type absent from the volume is not a structural
            # mismatch; there is simply nothing to compare against
            log.info("teds: skipping pair %s/%s (table absent)", name_a, name_b)
            continue
        for major in sorted(set(grouped_a) | set(grouped_b)):
            if major in grouped_a and major in grouped_b:
                tree_a = build_tree(grouped_a[major], arch_a, major, config.sort_trees)
                tree_b = build_tree(grouped_b[major], arch_b, major, config.sort_trees)
                scores.append(score_pair(tree_a, truncate_tree(tree_b, arch_a.depth)))
            else:
                # One table never mentions this major head: maximal distance.
                present_rows = grouped_a.get(major) or grouped_b[major]
                arch = arch_a if major in grouped_a else arch_b
                present = build_tree(present_rows, arch, major, config.sort_trees)
                size = tree_size(truncate_tree(present, arch_a.depth))
                scores.append(
                    StructureScore(major, (name_a, name_b), ted=size, nted=Fraction(1))
                )

    records = [
        {
            "major_head": s.major_head,
            "pair": list(s.pair),
            "ted": s.ted,
            "nted": float(s.nted),
        }
        for s in scores
    ]
    (out / "scores.json").write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")

    zero_pairs = sum(1 for s in scores if s.nted == 0)
    accuracy = structural_accuracy(scores) if scores else 0.0
    body = "file,pairs,zero_pairs,accuracy\n"
    body += f"{config.volume},{len(scores)},{zero_pairs},{accuracy:.2f}\n"
    (out / "accuracy.csv").write_text(body, encoding="utf-8")

    outcome = {"pairs": len(scores), "all_zero": zero_pairs == len(scores)}
    (out / "outcome.json").write_text(json.dumps(outcome) + "\n", encoding="utf-8")
    return scores


def stage_report(config: PipelineConfig) -> Path:
    out = _ensure_dir(Path(config.out) / "report")
    run_dir = Path(config.out)

    summary_path = run_dir / "validate" / "summary.csv"
    if not summary_path.is_file():
        raise MissingStageOutput(f"missing {summary_path}")
    summary_lines = summary_path.read_text(encoding="utf-8").splitlines()
    if len(summary_lines) < 2:
        raise MissingStageOutput("validation ran zero checks")
    table1 = ["volume,validation_type,checks,passed,pass_rate"]
    table1 += [f"{config.volume},{line}" for line in summary_lines[1:]]
    (out / "table1.csv").write_text("\n".join(table1) + "\n", encoding="utf-8")

    accuracy_path = run_dir / "teds" / "accuracy.csv"
    if not accuracy_path.is_file():
        raise MissingStageOutput(f"missing {accuracy_path}")
    pages = len(load_manifest(_manifest_path(config)))
    accuracy_line = accuracy_path.read_text(encoding="utf-8").splitlines()[1]
    _, pairs, zero_pairs, accuracy = accuracy_line.split(",")
    table2 = "file,pages,pairs,zero_pairs,accuracy\n"
    table2 += f"{config.volume},{pages},{pairs},{zero_pairs},{accuracy}\n"
    (out / "table2.csv").write_text(table2, encoding="utf-8")

    usage_path = run_dir / "extract" / "usage.json"
    if not usage_path.is_file():
        raise MissingStageOutput(f"missing {usage_path}")
    usage = json.loads(usage_path.read_text(encoding="utf-8"))
    table3 = "file,pages,input_tokens,thought_tokens,output_tokens\n"
    table3 += (
        f"{config.volume},{pages},{usage['input_tokens']},"
        f"{usage['thought_tokens']},{usage['output_tokens']}\n"
    )
    (out / "table3.csv").write_text(table3, encoding="utf-8")

    failures = (run_dir / "validate" / "failures.txt").read_text(encoding="utf-8")
    (out / "failures.txt").write_text(failures, encoding="utf-8")
    return out


# ------------------------------------------------------------ run-all chain


@dataclass
class RunOutcome:
    exit_code: int
    executed: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    error: str = ""


def _stage_digest(previous: str, params: dict) -> str:
    payload = json.dumps({"prev": previous, "params": params}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _stage_params(config: PipelineConfig, stage: str) -> dict:
    if stage == "rasterize":
        return {"pdf": str(config.pdf), "dpi": config.dpi, "rasterizer": config.rasterizer}
    if stage == "extract":
        return {
            "manifest": str(_manifest_path(config)),
            "backend": config.backend,
            "fixtures": str(config.fixtures),
            "prompt": config.prompt,
            "context_rows": config.context_rows,
        }
    if stage == "clean":
        return {"unit": config.unit.name}
    if stage == "build":
        return {"sort_trees": config.sort_trees}
    if stage == "validate":
        return {"tolerance": config.tolerance, "sort_trees": config.sort_trees}
    if stage == "teds":
        return {"sort_trees": config.sort_trees}
    if stage == "report":
        return {"volume": config.volume}
    raise ValueError(stage)


def run_all(config: PipelineConfig) -> RunOutcome:
    """Run every stage in order with config-digest caching."""
    try:
        config = config.validated()
    except ConfigError as exc:
        return RunOutcome(exit_code=1, error=f"config: {exc}")

    stages: list[tuple[str, object]] = []
    if config.pdf is not None:
        stages.append(("rasterize", stage_rasterize))
    stages += [
        ("extract", stage_extract),
        ("clean", stage_clean),
        ("build", stage_build),
        ("validate", stage_validate),
        ("teds", stage_teds),
        ("report", stage_report),
    ]

    outcome = RunOutcome(exit_code=0)
    stamp_dir = _ensure_dir(Path(config.out) / "stamps")
    digest = ""
    for name, runner in stages:
        digest = _stage_digest(digest, _stage_params(config, name))
        stamp = stamp_dir / f"{name}.txt"
        output_dir = Path(config.out) / name
        if stamp.is_file() and stamp.read_text() == digest and output_dir.is_dir():
            outcome.skipped.append(name)
            continue
        try:
            runner(config)  # type: ignore[operator]
        except LedgerliftError as exc:
            outcome.exit_code = 1
            outcome.error = f"{name}: {exc}"
            log.error("stage %s failed: %s", name, exc)
            return outcome
        stamp.write_text(digest)
        outcome.executed.append(name)

    validate_outcome = json.loads(
        (Path(config.out) / "validate" / "outcome.json").read_text(encoding="utf-8")
    )
    teds_outcome = json.loads(
        (Path(config.out) / "teds" / "outcome.json").read_text(encoding="utf-8")
    )
    if validate_outcome["any_fail"] or not teds_outcome["all_zero"]:
        outcome.exit_code = 2
    return outcome


# ---------------------------------------------------------------------- CLI


def _config_from_cli(config_path: str | None, **overrides) -> PipelineConfig:
    values = parse_config_file(config_path) if config_path else {}
    mapped = config_from_mapping(values)
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if "unit" in cleaned:
        cleaned["unit"] = UnitContext[cleaned["unit"].upper()]
    for key in ("pdf", "manifest", "fixtures", "out"):
        if key in cleaned:
            cleaned[key] = Path(cleaned[key])
    return replace(mapped, **cleaned)


_unit_option = click.option(
    "--unit",
    type=click.Choice(["unit", "thousand", "lakh", "crore"], case_sensitive=False),
    default=None,
    help="Monetary unit the document prints amounts in.",
)


@click.group()
@click.version_option(__version__)
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Hierarchical fiscal PDF tables to validated CSV."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)


@main.command("rasterize")
@click.option("--pdf", required=True, type=click.Path(exists=True))
@click.option("--dpi", default=DEFAULT_DPI, show_default=True)
@click.option("--tool", default="", help="Converter command template override.")
@click.option("--out", required=True, type=click.Path())
def rasterize_cmd(pdf: str, dpi: int, tool: str, out: str) -> None:
    """Render a PDF to page images plus a manifest."""
    kwargs = {"tool": tuple(shlex.split(tool))} if tool else {}
    pages = rasterize(pdf, dpi=dpi, out_dir=out, **kwargs)
    click.echo(f"{len(pages)} pages -> {Path(out) / MANIFEST_NAME}")


@main.command("synth")
@click.option("--seed", default=7, show_default=True)
@click.option("--majors", default=3, show_default=True)
@click.option("--pages", default=20, show_default=True)
@click.option("--fanout-min", default=2, show_default=True)
@click.option("--fanout-max", default=3, show_default=True)
@_unit_option
@click.option("--inject-kind", "inject_kinds", multiple=True,
              type=click.Choice([k.value for k in ErrorKind]))
@click.option("--inject-count", default=0, show_default=True)
@click.option("--inject-seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth_cmd(seed, majors, pages, fanout_min, fanout_max, unit, inject_kinds,
              inject_count, inject_seed, out) -> None:
    """Generate a synthetic corpus (optionally with injected errors)."""
    spec = CorpusSpec(
        seed=seed,
        major_heads=majors,
        fanout=(fanout_min, fanout_max),
        pages=pages,
        unit=UnitContext[unit.upper()] if unit else UnitContext.THOUSAND,
    )
    corpus = generate_corpus(spec)
    if inject_count:
        kinds = [ErrorKind(k) for k in inject_kinds] or [ErrorKind.DIGIT_PERTURB]
        corpus, ledger = inject_errors(corpus, kinds, inject_count, inject_seed)
        write_corpus(corpus, out)
        write_ledger(ledger, Path(out) / "ledger.csv")
        click.echo(f"corpus with {len(ledger)} injected errors -> {out}")
    else:
        write_corpus(corpus, out)
        click.echo(f"clean corpus ({len(corpus.pages)} pages) -> {out}")


@main.command("extract")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--backend", type=click.Choice(["fixture", "live"]), default="fixture")
@click.option("--fixtures", type=click.Path(), default=None)
@click.option("--prompt", default="static", show_default=True,
              help="static, auto, or a prompt file path.")
@click.option("--context-rows", default=20, show_default=True)
@click.option("--out", required=True, type=click.Path())
def extract_cmd(manifest, backend, fixtures, prompt, context_rows, out) -> None:
    """Run the page-by-page extraction against a backend."""
    config = PipelineConfig(
        manifest=Path(manifest),
        backend=backend,
        fixtures=Path(fixtures) if fixtures else None,
        prompt=prompt,
        context_rows=context_rows,
        out=Path(out),
    ).validated()
    extracts = stage_extract(config)
    total = accumulate_usage([e.usage for e in extracts])
    click.echo(f"{len(extracts)} pages extracted, usage {total.as_tuple()}")


@main.command("clean")
@_unit_option
@click.option("--out", required=True, type=click.Path())
def clean_cmd(unit, out) -> None:
    """Clean the raw extraction into schema-conformant CSVs."""
    config = PipelineConfig(
        manifest=Path(out),  # not used by this stage
        unit=UnitContext[unit.upper()] if unit else UnitContext.UNIT,
        out=Path(out),
    )
    result = stage_clean(config)
    emitted = sum(len(r) for r in result.rows_by_archetype.values())
    click.echo(
        f"{emitted} rows, {len(result.repair_log())} repairs, "
        f"{len(result.quarantined)} quarantined"
    )


@main.command("build")
@click.option("--sort-trees", is_flag=True)
@click.option("--out", required=True, type=click.Path())
def build_cmd(sort_trees, out) -> None:
    """Build per-Major-Head trees and write their dumps."""
    config = PipelineConfig(manifest=Path(out), out=Path(out), sort_trees=sort_trees)
    trees = stage_build(config)
    click.echo(f"{sum(len(t) for t in trees.values())} trees built")


@main.command("validate")
@click.option("--tolerance", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def validate_cmd(tolerance, out) -> None:
    """Run the summation consistency checks."""
    config = PipelineConfig(manifest=Path(out), out=Path(out), tolerance=tolerance)
    results, any_fail = stage_validate(config)
    click.echo(f"{len(results)} checks, any_fail={any_fail}")
    sys.exit(2 if any_fail else 0)


@main.command("teds")
@click.option("--sort-trees", is_flag=True)
@click.option("--out", required=True, type=click.Path())
def teds_cmd(sort_trees, out) -> None:
    """Score structural agreement between archetype pairs."""
    config = PipelineConfig(manifest=Path(out), out=Path(out), sort_trees=sort_trees)
    scores = stage_teds(config)
    zero = sum(1 for s in scores if s.nted == 0)
    click.echo(f"{zero}/{len(scores)} tree pairs identical")


@main.command("report")
@click.option("--volume", default="volume", show_default=True)
@click.option("--manifest", default=None, type=click.Path())
@click.option("--out", required=True, type=click.Path())
def report_cmd(volume, manifest, out) -> None:
    """Assemble the summary tables and the failure blocks."""
    config = PipelineConfig(
        manifest=Path(manifest) if manifest else Path(out) / "rasterize" / MANIFEST_NAME,
        out=Path(out),
        volume=volume,
    )
    path = stage_report(config)
    click.echo(f"report -> {path}")


@main.command("all")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--pdf", type=click.Path(), default=None)
@click.option("--manifest", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["fixture", "live"]), default=None)
@click.option("--fixtures", type=click.Path(), default=None)
@click.option("--prompt", default=None)
@click.option("--context-rows", type=int, default=None)
@_unit_option
@click.option("--tolerance", type=int, default=None)
@click.option("--volume", default=None)
@click.option("--out", type=click.Path(), default=None)
def all_cmd(config_path, **overrides) -> None:
    """Run the whole pipeline; exit 0 clean, 2 on check failures."""
    try:
        config = _config_from_cli(config_path, **overrides)
    except ConfigError as exc:
        click.echo(f"config: {exc}", err=True)
        sys.exit(1)
    outcome = run_all(config)
    if outcome.error:
        click.echo(outcome.error, err=True)
    else:
        click.echo(
            f"executed {','.join(outcome.executed) or '-'}; "
            f"cached {','.join(outcome.skipped) or '-'}"
        )
    sys.exit(outcome.exit_code)


if __name__ == "__main__":
    main()
