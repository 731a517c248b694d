"""Semantic CSV cleaning for raw extraction output.

The raw rows coming back from a vision backend drift from the schema in a
small, modeled set of ways: a description spilled across two cells, an empty
level-code cell dropped from a total row, a stray repeated header line in
the middle of a table. Repairs are restricted to exactly those classes;
anything else is quarantined rather than guessed, because the downstream
consistency checks are better at pointing a human at a gap than any
heuristic is at papering over one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import (
    AMOUNT_SLICE,
    ARCHETYPES,
    CATEGORIES,
    CHARGES,
    COL_CATEGORY,
    COL_CHARGE,
    COL_PAGE,
    COL_ROW_TYPE,
    COLUMNS,
    ExtractedRow,
    InvalidFieldValue,
    LEVEL_SLICE,
    LedgerliftError,
    NegativeAmount,
    NotANumber,
    RowKind,
    SchemaArchetype,
    UnitContext,
    classify_fields,
    is_amount_token,
    is_code_token,
    parse_row,
    split_fields,
)
from .extraction import RawPageExtract


class Unrepairable(LedgerliftError, ValueError):
    """No modeled repair brings the row to the schema shape."""


class RepairKind(enum.Enum):
    MERGE_DESCRIPTION = "MergeDescription"
    INSERT_EMPTY_CODE = "InsertEmptyCode"
    DROP_HEADER_LINE = "DropHeaderLine"
    NONE = "None"


@dataclass(frozen=True)
class RepairAction:
    page: int
    raw_line_index: int
    kind: RepairKind
    detail: str = ""


@dataclass(frozen=True)
class QuarantineRecord:
    page: int
    line: int
    text: str
    reason: str


@dataclass
class CleanResult:
    """Cleaned rows grouped by archetype plus the full repair story."""

    rows_by_archetype: dict[str, list[ExtractedRow]]
    actions: list[RepairAction]  # one per emitted row, possibly kind NONE
    dropped: list[RepairAction]  # DropHeaderLine entries
    quarantined: list[QuarantineRecord]

    def repair_log(self) -> list[RepairAction]:
        log = [a for a in self.actions if a.kind is not RepairKind.NONE]
        log.extend(self.dropped)
        log.sort(key=lambda a: (a.page, a.raw_line_index))
        return log


def classify_row(fields: list[str]) -> RowKind:
    """Header/Data/Total from cell content; the Row_Type cell is not trusted."""
    if not fields:
        raise ValueError("empty field list")
    return classify_fields(fields)


def _code_prefix_len(cells: list[str]) -> int:
    n = 0
    for c in cells:
        if c and is_code_token(c):
            n += 1
        else:
            break
    return n


def _row_shape_ok(fields: list[str], archetype: SchemaArchetype) -> bool:
    """Strict conformance test used to accept a repair candidate."""
    if len(fields) != len(COLUMNS):
        return False
    cells = [c.strip() for c in fields]
    if cells[COL_PAGE] and not cells[COL_PAGE].isdigit():
        return False
    if cells[COL_ROW_TYPE] not in ("", "Header", "Data", "Total"):
        return False

    level_cells = cells[LEVEL_SLICE]
    prefix = _code_prefix_len(level_cells)
    if any(level_cells[prefix:]):  # gap or non-code text in the level region
        return False
    if prefix > archetype.depth:
        return False

    if cells[COL_CATEGORY] and cells[COL_CATEGORY] not in CATEGORIES:
        return False
    if cells[COL_CHARGE] and cells[COL_CHARGE] not in CHARGES:
        return False
    for cell in cells[AMOUNT_SLICE]:
        if cell and not is_amount_token(cell):
            return False

    kind = classify_fields(cells)
    if cells[COL_ROW_TYPE] and cells[COL_ROW_TYPE] != kind.value:
        return False
    if kind in (RowKind.DATA, RowKind.TOTAL) and prefix == 0:
        return False
    return True


def _mergeable(a: str, b: str) -> bool:
    # Numeric-parseable cells are never merged: token conservation.
    return not is_amount_token(a) and not is_amount_token(b)


def _merge(fields: list[str], i: int) -> list[str]:
    left, right = fields[i], fields[i + 1]
    joined = f"{left} {right}" if left and right else left + right
    return fields[:i] + [joined] + fields[i + 2 :]


def _search_merges(
    fields: list[str], archetype: SchemaArchetype, trail: list[int]
) -> tuple[list[str], list[int]] | None:
    """Leftmost-first search for merges reaching a conformant 15-field row."""
    if len(fields) == len(COLUMNS):
        return (fields, trail) if _row_shape_ok(fields, archetype) else None
    for i in range(len(fields) - 1):
        if not _mergeable(fields[i], fields[i + 1]):
            continue
        found = _search_merges(_merge(fields, i), archetype, trail + [i])
        if found is not None:
            return found
    return None


def realign_row(
    fields: list[str], archetype: SchemaArchetype
) -> tuple[list[str], RepairKind, str]:
    """Repair a misaligned row to the 15-column layout.

    Over-long rows are fixed by merging adjacent non-numeric cells,
    leftmost candidate first, until the row validates. Short rows are
    fixed only for total rows, by re-inserting the empty level cell right
    after the filled code prefix. Returns the repaired fields, the repair
    kind (NONE for already conformant rows), and a human-readable detail.
    """
    target = len(COLUMNS)
    if len(fields) == target:
        if _row_shape_ok(fields, archetype):
            return list(fields), RepairKind.NONE, ""
        raise Unrepairable("15-field row fails schema shape checks")

    if len(fields) > target:
        found = _search_merges(list(fields), archetype, [])
        if found is None:
            raise Unrepairable(f"{len(fields)} fields, no merge candidate validates")
        repaired, trail = found
        detail = "merged cells at " + ",".join(str(i) for i in trail)
        return repaired, RepairKind.MERGE_DESCRIPTION, detail

    if len(fields) == target - 1:
        kind = classify_fields(fields)
        if kind is RowKind.TOTAL:
            level_cells = [c.strip() for c in fields[LEVEL_SLICE]]
            prefix = _code_prefix_len(level_cells)
            position = LEVEL_SLICE.start + prefix
            repaired = fields[:position] + [""] + fields[position:]
            if _row_shape_ok(repaired, archetype):
                detail = f"inserted empty level cell at {position}"
                return repaired, RepairKind.INSERT_EMPTY_CODE, detail
        raise Unrepairable("short row is not a repairable total row")

    raise Unrepairable(f"{len(fields)} fields cannot be realigned to {target}")


def clean_table(
    raw: RawPageExtract,
    unit: UnitContext,
    archetypes: dict[str, SchemaArchetype] = ARCHETYPES,
) -> CleanResult:
    """Classify, realign and parse every raw line of one page's extract.

    Header rows are logged and dropped; rows that fail every modeled repair
    or do not parse are quarantined with their location. Ordering within
    each archetype follows the raw stream.
    """
    rows_by_archetype: dict[str, list[ExtractedRow]] = {}
    actions: list[RepairAction] = []
    dropped: list[RepairAction] = []
    quarantined: list[QuarantineRecord] = []

    for segment in raw.segments:
        archetype = archetypes.get(segment.archetype)
        if archetype is None:
            quarantined.extend(
                QuarantineRecord(
                    raw.page, l.number, l.text, f"unknown archetype {segment.archetype!r}"
                )
                for l in segment.lines
            )
            continue
        for raw_line in segment.lines:
            try:
                fields = split_fields(raw_line.text)
            except Exception:
                quarantined.append(
                    QuarantineRecord(raw.page, raw_line.number, raw_line.text, "unparseable CSV")
                )
                continue
            if not any(c.strip() for c in fields):
                continue
            if classify_fields(fields) is RowKind.HEADER:
                dropped.append(
                    RepairAction(
                        raw.page,
                        raw_line.number,
                        RepairKind.DROP_HEADER_LINE,
                        detail=raw_line.text[:80],
                    )
                )
                continue
            try:
                repaired, kind, detail = realign_row(fields, archetype)
            except Unrepairable as exc:
                quarantined.append(
                    QuarantineRecord(raw.page, raw_line.number, raw_line.text, str(exc))
                )
                continue
            try:
                row = parse_row(
                    repaired, archetype, raw.page, unit, line=raw_line.number
                )
            except (NotANumber, NegativeAmount, InvalidFieldValue) as exc:
                quarantined.append(
                    QuarantineRecord(raw.page, raw_line.number, raw_line.text, str(exc))
                )
                continue
            rows_by_archetype.setdefault(segment.archetype, []).append(row)
            actions.append(RepairAction(raw.page, raw_line.number, kind, detail))

    return CleanResult(rows_by_archetype, actions, dropped, quarantined)


def quarantine_lines(records: list[QuarantineRecord]) -> str:
    """Quarantine file body: raw lines with page:line prefixes."""
    return "".join(f"{r.page}:{r.line}\t{r.text}\n" for r in records)
