"""Seeded synthetic fiscal corpora with a precise fault-injection ledger.

The generator grows a random head forest, sums amounts bottom-up so every
total is exact by construction, then lays the five archetype tables out
over numbered pages in the extraction wire format. The result doubles as
ground truth (canonical CSVs) and as fixture responses a deterministic
backend can replay, which is what end-to-end tests run against.

The injector corrupts selected lines in the modeled ways the cleaner and
the validators must catch, and records every corruption in a ledger whose
(page, line) coordinates refer to the corrupted stream.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .core import (
    CSV_HEADER,
    LedgerliftError,
    RowKind,
    UnitContext,
    is_amount_token,
    render_amount,
    serialize_fields,
    split_fields,
)
from .extraction import TokenUsage
from .ingest import DEFAULT_DPI, MANIFEST_NAME, PORTRAIT, PageImage, save_manifest

LEVEL_SLICE = slice(2, 8)

ARCHETYPE_SEQUENCE = (
    "SubMajorHead",
    "MinorHead",
    "SubHead",
    "DetailedHead",
    "ObjectHead",
)

_VOCAB = (
    "Direction Administration Establishment Salaries Wages Allowances "
    "Office Expenses Rent Rates Taxes Travel Maintenance Machinery "
    "Equipment Materials Supplies Services Grants Aid Subsidies Schemes "
    "Development Welfare Pensions Works Buildings Roads Bridges Water "
    "Irrigation Education Health Training Research Surveys Inspection "
    "Stores Transport Charges"
).split()


class InsufficientTargets(LedgerliftError, ValueError):
    """Fewer eligible lines than requested corruptions."""


class ErrorKind(enum.Enum):
    DIGIT_PERTURB = "DigitPerturb"
    DESCRIPTION_SPLIT = "DescriptionSplit"
    MISSING_CODE_CELL = "MissingCodeCell"
    HEADER_NOISE = "HeaderNoise"


@dataclass(frozen=True)
class CorpusSpec:
    seed: int
    major_heads: int = 3
    fanout: tuple[int, int] = (2, 3)
    pages: int = 20
    unit: UnitContext = UnitContext.THOUSAND

    def __post_init__(self) -> None:
        if self.fanout[0] < 1 or self.fanout[0] > self.fanout[1]:
            raise ValueError(f"bad fanout {self.fanout}")
        if self.major_heads < 1 or self.pages < 1:
            raise ValueError("major_heads and pages must be positive")


@dataclass(frozen=True)
class LedgerEntry:
    page: int
    line: int
    error_kind: ErrorKind
    original: str  # empty for pure insertions
    corrupted: str


@dataclass
class FixturePage:
    number: int
    archetype: str
    rows: list[list[str]]
    closes: bool


@dataclass
class Corpus:
    spec: CorpusSpec
    pages: list[FixturePage]
    truth: dict[str, list[list[str]]]
    usages: list[TokenUsage]


# ---------------------------------------------------------------- generation


@dataclass
class _Head:
    code: str
    description: str
    printed: tuple[int, int, int, int]
    category: str
    charge: str
    children: list["_Head"]


_CODE_RANGES = {
    2: (1, 80, 2),  # sub major: 01..80
    3: (100, 899, 3),
    4: (1, 80, 2),
    5: (1, 99, 2),
    6: (1, 899, 3),
}


def _grow(rng: random.Random, depth: int, spec: CorpusSpec, category: str, charge: str) -> list[_Head]:
    count = rng.randint(*spec.fanout)
    low, high, width = _CODE_RANGES[depth]
    codes = sorted(rng.sample(range(low, high + 1), count))
    heads = []
    for code in codes:
        description = " ".join(rng.sample(_VOCAB, rng.randint(2, 3)))
        if depth == 3:  # category and charge vary at programme level
            category = rng.choice(("Revenue", "Capital"))
            charge = rng.choice(("Voted", "Charged"))
        if depth == 6:
            printed = tuple(rng.randint(1, 10**6) for _ in range(4))
            children: list[_Head] = []
        else:
            children = _grow(rng, depth + 1, spec, category, charge)
            printed = tuple(
                sum(c.printed[i] for c in children) for i in range(4)
            )
        heads.append(
            _Head(
                code=str(code).zfill(width),
                description=description,
                printed=printed,  # type: ignore[arg-type]
                category=category,
                charge=charge,
                children=children,
            )
        )
    return heads


def _build_forest(spec: CorpusSpec) -> list[_Head]:
    base = random.Random(spec.seed)
    major_codes = sorted(base.sample(range(2000, 8000), spec.major_heads))
    major_seeds = [base.randrange(2**63) for _ in major_codes]
    forest = []
    for code, sub_seed in zip(major_codes, major_seeds):
        rng = random.Random(sub_seed)  # derived seed per major head
        description = " ".join(rng.sample(_VOCAB, 2))
        children = _grow(rng, 2, spec, "", "")
        printed = tuple(sum(c.printed[i] for c in children) for i in range(4))
        forest.append(
            _Head(str(code), description, printed, "", "", children)  # type: ignore[arg-type]
        )
    return forest


@dataclass
class _Proto:
    kind: RowKind
    path: tuple[str, ...]
    description: str
    category: str
    charge: str
    printed: tuple[int, int, int, int]
    grouped: tuple[bool, bool, bool, bool]


def _protos_for_archetype(
    forest: list[_Head], depth: int, rng: random.Random
) -> list[list[_Proto]]:
    """Row protos grouped into pagination units.

    Every node at the archetype's depth yields one Data row. The deepest
    archetype also emits a Total row after each Detailed Head block, and
    the block (object rows plus total) stays atomic across page breaks.
    """

    def groups(head: _Head, path: tuple[str, ...]) -> list[list[_Proto]]:
        path = path + (head.code,)
        if len(path) == depth:
            return [[_proto_for(head, path, RowKind.DATA, rng)]]
        out: list[list[_Proto]] = []
        if depth == 6 and len(path) == 5:
            block = [
                _proto_for(child, path + (child.code,), RowKind.DATA, rng)
                for child in head.children
            ]
            total = _Proto(
                kind=RowKind.TOTAL,
                path=path,
                description=f"Total {head.code}",
                category=head.category,
                charge=head.charge,
                printed=head.printed,
                grouped=tuple(rng.random() < 0.3 for _ in range(4)),  # type: ignore[arg-type]
            )
            return [block + [total]]
        for child in head.children:
            out.extend(groups(child, path))
        return out

    units: list[list[_Proto]] = []
    for major in forest:
        units.extend(groups(major, ()))
    return units


def _proto_for(head: _Head, path: tuple[str, ...], kind: RowKind, rng: random.Random) -> _Proto:
    return _Proto(
        kind=kind,
        path=path,
        description=head.description,
        category=head.category if len(path) >= 3 else "",
        charge=head.charge if len(path) >= 3 else "",
        printed=head.printed,
        grouped=tuple(rng.random() < 0.3 for _ in range(4)),  # type: ignore[arg-type]
    )


def _allocate_pages(row_counts: list[int], total_pages: int) -> list[int]:
    """Proportional page budget per table, each >= 1.

    Sums to the target exactly unless the target is below the table count,
    in which case every table still gets one page.
    """
    total_rows = sum(row_counts)
    raw = [total_pages * c / total_rows for c in row_counts]
    budget = [max(1, math.floor(r)) for r in raw]
    while sum(budget) > total_pages:
        shrinkable = [k for k in range(len(budget)) if budget[k] > 1]
        if not shrinkable:
            break
        budget[max(shrinkable, key=lambda k: budget[k])] -= 1
    remainders = sorted(
        range(len(budget)), key=lambda k: raw[k] - math.floor(raw[k]), reverse=True
    )
    i = 0
    while sum(budget) < total_pages:
        budget[remainders[i % len(remainders)]] += 1
        i += 1
    return budget


def _paginate(units: list[list[_Proto]], page_budget: int) -> list[list[_Proto]]:
    page_budget = min(page_budget, len(units))
    pages: list[list[_Proto]] = []
    i = 0
    for remaining_pages in range(page_budget, 0, -1):
        rows_left = sum(len(u) for u in units[i:])
        quota = math.ceil(rows_left / remaining_pages)
        page: list[_Proto] = []
        while i < len(units):
            units_left_after = len(units) - i - 1
            if page and (len(page) >= quota or units_left_after < remaining_pages - 1):
                break
            page.extend(units[i])
            i += 1
        pages.append(page)
    return pages


def _wire_fields(proto: _Proto, page_number: int, unit: UnitContext) -> list[str]:
    level_cells = list(proto.path) + [""] * (6 - len(proto.path))
    amount_cells = [
        render_amount(v * unit.scale, unit, grouped=g)
        for v, g in zip(proto.printed, proto.grouped)
    ]
    return [
        str(page_number),
        proto.kind.value,
        *level_cells,
        proto.description,
        proto.category,
        proto.charge,
        *amount_cells,
    ]


def _truth_fields(proto: _Proto, page_number: int, unit: UnitContext) -> list[str]:
    level_cells = list(proto.path) + [""] * (6 - len(proto.path))
    return [
        str(page_number),
        proto.kind.value,
        *level_cells,
        proto.description,
        proto.category,
        proto.charge,
        *[str(v * unit.scale) for v in proto.printed],
    ]


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Grow the forest, lay out the five tables, and package the fixtures."""
    forest = _build_forest(spec)
    layout_rng = random.Random(spec.seed ^ 0x5EED)

    units_by_archetype = {
        name: _protos_for_archetype(forest, depth, layout_rng)
        for depth, name in zip(range(2, 7), ARCHETYPE_SEQUENCE)
    }
    row_counts = [sum(len(u) for u in units_by_archetype[n]) for n in ARCHETYPE_SEQUENCE]
    budgets = _allocate_pages(row_counts, spec.pages)

    pages: list[FixturePage] = []
    truth: dict[str, list[list[str]]] = {name: [] for name in ARCHETYPE_SEQUENCE}
    page_number = 0
    for name, budget in zip(ARCHETYPE_SEQUENCE, budgets):
        table_pages = _paginate(units_by_archetype[name], budget)
        for index, protos in enumerate(table_pages):
            page_number += 1
            rows = [_wire_fields(p, page_number, spec.unit) for p in protos]
            truth[name].extend(_truth_fields(p, page_number, spec.unit) for p in protos)
            pages.append(
                FixturePage(
                    number=page_number,
                    archetype=name,
                    rows=rows,
                    closes=index == len(table_pages) - 1,
                )
            )

    usage_rng = random.Random(spec.seed ^ 0x70C3)
    usages = [
        TokenUsage(
            usage_rng.randint(4000, 9000),
            usage_rng.randint(5000, 12000),
            usage_rng.randint(1000, 3000),
        )
        for _ in pages
    ]
    return Corpus(spec=spec, pages=pages, truth=truth, usages=usages)


def render_page(page: FixturePage) -> str:
    lines = [f"### ARCHETYPE: {page.archetype}"]
    lines.extend(serialize_fields(row) for row in page.rows)
    if page.closes:
        lines.append(f"### END: {page.archetype}")
    return "\n".join(lines) + "\n"


def page_image_bytes(page_number: int, seed: int) -> bytes:
    # Stand-in page image: unique bytes per page so digest keying works
    # without rendering anything visual.
    return f"ledgerlift synthetic page {page_number} seed {seed}\n".encode("utf-8")


# ----------------------------------------------------------------- injection


def _description_split_points(description: str) -> list[int]:
    words = description.split(" ")
    points = []
    for k in range(1, len(words)):
        left = " ".join(words[:k])
        right = " ".join(words[k:])
        if left and right and not is_amount_token(left) and not is_amount_token(right):
            points.append(k)
    return points


def _first_empty_level_index(fields: list[str]) -> int | None:
    for i in range(LEVEL_SLICE.start, LEVEL_SLICE.stop):
        if not fields[i].strip():
            return i
    return None


def _eligible(corpus: Corpus, kind: ErrorKind) -> list[tuple[int, int]]:
    """(page index, row index) slots the kind may corrupt."""
    slots: list[tuple[int, int]] = []
    for p_idx, page in enumerate(corpus.pages):
        for r_idx, fields in enumerate(page.rows):
            if kind is ErrorKind.DIGIT_PERTURB:
                # Only rows a configured check covers, so every corruption
                # is observable: deepest table rows and programme rows.
                if page.archetype == "ObjectHead" or (
                    page.archetype == "MinorHead" and fields[1] == RowKind.DATA.value
                ):
                    slots.append((p_idx, r_idx))
            elif kind is ErrorKind.DESCRIPTION_SPLIT:
                if _description_split_points(fields[8]):
                    slots.append((p_idx, r_idx))
            elif kind is ErrorKind.MISSING_CODE_CELL:
                if fields[1] == RowKind.TOTAL.value and _first_empty_level_index(fields) is not None:
                    slots.append((p_idx, r_idx))
            elif kind is ErrorKind.HEADER_NOISE:
                slots.append((p_idx, r_idx))
    return slots


def inject_errors(
    corpus: Corpus, kinds: list[ErrorKind], count: int, seed: int
) -> tuple[Corpus, list[LedgerEntry]]:
    """Corrupt `count` lines, cycling through the requested kinds.

    Rows are hit at most once, and amount perturbations are additionally
    capped at one per Minor Head subtree so that no two corruptions can
    mask each other in an aggregate. Insertion entries record the line
    number they occupy in the corrupted stream.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = random.Random(seed)
    eligible = {kind: _eligible(corpus, kind) for kind in set(kinds)}
    used_rows: set[tuple[int, int]] = set()
    used_minor_groups: set[tuple[str, ...]] = set()

    # (page idx, row idx) -> (kind, replacement fields)
    edits: dict[tuple[int, int], tuple[ErrorKind, list[str]]] = {}
    # (page idx, insert position) -> noise fields
    inserts: dict[tuple[int, int], list[str]] = {}

    for n in range(count):
        kind = kinds[n % len(kinds)]
        slots = [s for s in eligible[kind] if s not in used_rows]
        if kind is ErrorKind.DIGIT_PERTURB:
            slots = [
                s
                for s in slots
                if _minor_group(corpus.pages[s[0]].rows[s[1]]) not in used_minor_groups
            ]
        if kind is ErrorKind.HEADER_NOISE:
            positions = [
                (p_idx, pos)
                for p_idx, page in enumerate(corpus.pages)
                for pos in range(len(page.rows) + 1)
                if (p_idx, pos) not in inserts
            ]
            if not positions:
                raise InsufficientTargets("no insertion positions left")
            p_idx, pos = rng.choice(positions)
            inserts[(p_idx, pos)] = split_fields(CSV_HEADER)
            continue
        if not slots:
            raise InsufficientTargets(f"no eligible lines left for {kind.value}")
        slot = rng.choice(slots)
        used_rows.add(slot)
        fields = list(corpus.pages[slot[0]].rows[slot[1]])
        if kind is ErrorKind.DIGIT_PERTURB:
            used_minor_groups.add(_minor_group(fields))
            edits[slot] = (kind, _perturb_amount(fields, rng))
        elif kind is ErrorKind.DESCRIPTION_SPLIT:
            edits[slot] = (kind, _split_description(fields, rng))
        elif kind is ErrorKind.MISSING_CODE_CELL:
            drop = _first_empty_level_index(fields)
            assert drop is not None
            edits[slot] = (kind, fields[:drop] + fields[drop + 1 :])

    corrupted_pages: list[FixturePage] = []
    ledger: list[LedgerEntry] = []
    for p_idx, page in enumerate(corpus.pages):
        rows: list[list[str]] = []
        marks: list[tuple[ErrorKind, str] | None] = []
        for r_idx in range(len(page.rows) + 1):
            noise = inserts.get((p_idx, r_idx))
            if noise is not None:
                rows.append(noise)
                marks.append((ErrorKind.HEADER_NOISE, ""))
            if r_idx == len(page.rows):
                break
            edit = edits.get((p_idx, r_idx))
            if edit is not None:
                rows.append(edit[1])
                marks.append((edit[0], serialize_fields(page.rows[r_idx])))
            else:
                rows.append(page.rows[r_idx])
                marks.append(None)
        for line_offset, (fields, mark) in enumerate(zip(rows, marks)):
            if mark is None:
                continue
            ledger.append(
                LedgerEntry(
                    page=page.number,
                    line=line_offset + 2,  # line 1 is the segment header
                    error_kind=mark[0],
                    original=mark[1],
                    corrupted=serialize_fields(fields),
                )
            )
        corrupted_pages.append(
            FixturePage(page.number, page.archetype, rows, page.closes)
        )

    ledger.sort(key=lambda e: (e.page, e.line))
    return (
        Corpus(spec=corpus.spec, pages=corrupted_pages, truth=corpus.truth, usages=corpus.usages),
        ledger,
    )


def _minor_group(fields: list[str]) -> tuple[str, ...]:
    return tuple(c.strip() for c in fields[2:5])


def _perturb_amount(fields: list[str], rng: random.Random) -> list[str]:
    column = rng.randrange(4)
    cell = fields[11 + column]
    grouped = "," in cell
    value = int(cell.replace(",", ""))
    delta = rng.randint(1, 9) * 10 ** rng.randint(0, 3)
    new_value = value + delta
    out = list(fields)
    out[11 + column] = render_amount(new_value, UnitContext.UNIT, grouped=grouped)
    return out


def _split_description(fields: list[str], rng: random.Random) -> list[str]:
    points = _description_split_points(fields[8])
    k = rng.choice(points)
    words = fields[8].split(" ")
    left = " ".join(words[:k])
    right = " ".join(words[k:])
    return fields[:8] + [left, right] + fields[9:]


# --------------------------------------------------------------- persistence


def write_corpus(corpus: Corpus, out_dir: Path | str) -> Path:
    """Materialize images, manifest, fixture responses and truth CSVs."""
    out = Path(out_dir)
    images = out / "images"
    fixtures = out / "fixtures"
    truth_dir = out / "truth"
    for d in (images, fixtures, truth_dir):
        d.mkdir(parents=True, exist_ok=True)

    manifest: list[PageImage] = []
    for page, usage in zip(corpus.pages, corpus.usages):
        stub = page_image_bytes(page.number, corpus.spec.seed)
        image_path = images / f"page_{page.number:04d}.img"
        image_path.write_bytes(stub)
        manifest.append(
            PageImage(
                page_number=page.number,
                image_path=str(image_path),
                dpi=DEFAULT_DPI,
                orientation=PORTRAIT,
            )
        )
        digest = hashlib.sha256(stub).hexdigest()
        body = f"# usage: {usage.input_tokens} {usage.thought_tokens} {usage.output_tokens}\n"
        (fixtures / f"{digest}.txt").write_text(body + render_page(page), encoding="utf-8")
    save_manifest(manifest, out / MANIFEST_NAME)

    for name, rows in corpus.truth.items():
        lines = [CSV_HEADER] + [serialize_fields(r) for r in rows]
        (truth_dir / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    meta = {
        "seed": corpus.spec.seed,
        "major_heads": corpus.spec.major_heads,
        "fanout": list(corpus.spec.fanout),
        "pages": len(corpus.pages),
        "unit": corpus.spec.unit.name,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return out


def write_ledger(entries: list[LedgerEntry], path: Path | str) -> None:
    lines = ["page,line,error_kind,original,corrupted"]
    for e in entries:
        lines.append(
            serialize_fields(
                [str(e.page), str(e.line), e.error_kind.value, e.original, e.corrupted]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_ledger(path: Path | str) -> list[LedgerEntry]:
    entries = []
    text = Path(path).read_text(encoding="utf-8").splitlines()
    for line in text[1:]:
        page, line_no, kind, original, corrupted = split_fields(line)
        entries.append(
            LedgerEntry(int(page), int(line_no), ErrorKind(kind), original, corrupted)
        )
    return entries
