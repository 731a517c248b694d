"""Shared domain types for hierarchical fiscal table extraction.

The six-level head classification, the five CSV table archetypes, canonical
amount normalization (Indian units, digit grouping, Indic scripts), and the
parsing of raw field lists into typed rows live here. Everything is a pure
function over immutable values, so callers may fan work out freely.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import re
import unicodedata
from dataclasses import dataclass, fields as dc_fields
from decimal import ROUND_HALF_UP, Decimal


class LedgerliftError(Exception):
    """Base class for every error raised by this package."""


class NotANumber(LedgerliftError, ValueError):
    """A token expected to be numeric could not be parsed."""


class NegativeAmount(LedgerliftError, ValueError):
    """A negative amount was seen; flagged rather than silently accepted."""


class ColumnCountMismatch(LedgerliftError, ValueError):
    """A row's field count does not match the archetype column layout."""


class InvalidFieldValue(LedgerliftError, ValueError):
    """A cell holds a value outside its column's permitted vocabulary."""


class HierarchyLevel(enum.IntEnum):
    """The six nested head levels, ordered broadest (1) to finest (6)."""

    MAJOR_HEAD = 1
    SUB_MAJOR_HEAD = 2
    MINOR_HEAD = 3
    SUB_HEAD = 4
    DETAILED_HEAD = 5
    OBJECT_HEAD = 6

    @property
    def depth(self) -> int:
        return int(self)

    @property
    def title(self) -> str:
        """Camel-cased name as used in wire headers and file names."""
        return "".join(part.capitalize() for part in self.name.split("_"))


class RowKind(enum.Enum):
    HEADER = "Header"
    DATA = "Data"
    TOTAL = "Total"


class UnitContext(enum.Enum):
    """Monetary unit the document prints amounts in."""

    UNIT = 1
    THOUSAND = 10**3
    LAKH = 10**5
    CRORE = 10**7

    @property
    def scale(self) -> int:
        return self.value


# Shared column layout: every archetype CSV carries the same 15-column
# header; level columns beyond an archetype's depth stay empty.
COLUMNS: tuple[str, ...] = (
    "Page",
    "Row_Type",
    "Major_Head",
    "Sub_Major_Head",
    "Minor_Head",
    "Sub_Head",
    "Detailed_Head",
    "Object_Head",
    "Description",
    "Category",
    "Charge",
    "Accounts_2018_19",
    "Budget_2019_20",
    "Revised_2019_20",
    "Budget_2020_21",
)
CSV_HEADER = ",".join(COLUMNS)

COL_PAGE = 0
COL_ROW_TYPE = 1
LEVEL_SLICE = slice(2, 8)
COL_DESCRIPTION = 8
COL_CATEGORY = 9
COL_CHARGE = 10
AMOUNT_SLICE = slice(11, 15)

AMOUNT_COLUMNS: tuple[str, ...] = COLUMNS[AMOUNT_SLICE]

CATEGORIES = frozenset({"Revenue", "Capital"})
CHARGES = frozenset({"Voted", "Charged"})


@dataclass(frozen=True)
class SchemaArchetype:
    """One of the five CSV table types, named for its deepest level."""

    name: str
    level: HierarchyLevel
    column_layout: tuple[str, ...] = COLUMNS

    @property
    def depth(self) -> int:
        return self.level.depth


ARCHETYPES: dict[str, SchemaArchetype] = {
    level.title: SchemaArchetype(level.title, level)
    for level in (
        HierarchyLevel.SUB_MAJOR_HEAD,
        HierarchyLevel.MINOR_HEAD,
        HierarchyLevel.SUB_HEAD,
        HierarchyLevel.DETAILED_HEAD,
        HierarchyLevel.OBJECT_HEAD,
    )
}
ARCHETYPE_ORDER: tuple[str, ...] = tuple(ARCHETYPES)


def archetype_depth(archetype: SchemaArchetype) -> int:
    """Depth of the archetype per the head-level ordering."""
    return archetype.depth


@dataclass(frozen=True)
class FiscalAmountSet:
    """The four period amounts of a row, canonical integers or absent."""

    accounts_2018_19: int | None = None
    budget_2019_20: int | None = None
    revised_2019_20: int | None = None
    budget_2020_21: int | None = None

    def __post_init__(self) -> None:
        for f in dc_fields(self):
            v = getattr(self, f.name)
            if v is not None and (not isinstance(v, int) or v < 0):
                raise NegativeAmount(f"{f.name}={v!r}")

    def as_tuple(self) -> tuple[int | None, int | None, int | None, int | None]:
        return (
            self.accounts_2018_19,
            self.budget_2019_20,
            self.revised_2019_20,
            self.budget_2020_21,
        )

    @classmethod
    def from_tuple(cls, values: tuple[int | None, ...]) -> "FiscalAmountSet":
        return cls(*values)


def sum_amounts(sets: list[FiscalAmountSet]) -> tuple[int, int, int, int]:
    """Column-wise sum over amount sets; absent components count as zero."""
    totals = [0, 0, 0, 0]
    for s in sets:
        for i, v in enumerate(s.as_tuple()):
            if v is not None:
                totals[i] += v
    return tuple(totals)  # type: ignore[return-value]


@dataclass(frozen=True)
class ExtractedRow:
    """One cleaned table row with normalized amounts.

    ``code_path`` is the head codes from Major Head down to the row's own
    level; an internal empty string marks a skipped level, which tree
    construction materializes and reports.
    """

    page: int
    line: int
    kind: RowKind
    code_path: tuple[str, ...]
    description: str
    amounts: FiscalAmountSet
    category: str | None = None
    charge: str | None = None

    @property
    def major_head(self) -> str:
        return self.code_path[0] if self.code_path else ""


_TOTAL_RE = re.compile(r"total\b", re.IGNORECASE)
_CODE_RE = re.compile(r"\d{1,4}(-\d{1,4})?")
_NUMERIC_RE = re.compile(r"\d+(\.\d+)?")


@functools.lru_cache(maxsize=8192)
def is_code_token(text: str) -> bool:
    """True for head-code-shaped cells: short digit runs, optional dash."""
    return bool(_CODE_RE.fullmatch(text.strip()))


@functools.lru_cache(maxsize=8192)
def is_amount_token(text: str) -> bool:
    """True when the cell parses as a (possibly negative) amount."""
    try:
        parse_amount(text, UnitContext.UNIT)
    except NegativeAmount:
        return True
    except NotANumber:
        return False
    return True


def has_total_marker(text: str) -> bool:
    return bool(_TOTAL_RE.match(text.strip()))


def classify_fields(fields: list[str]) -> RowKind:
    """Derive the row kind from cell content alone.

    The wire Row_Type cell is advisory; classification never trusts it.
    On a conformant 15-field row only the Description cell is checked for
    the total marker; misaligned rows fall back to scanning every textual
    cell so the kind is still available to drive realignment.
    """
    cells = [c.strip() for c in fields]
    if len(cells) == len(COLUMNS):
        marker_cells = [cells[COL_DESCRIPTION]]
    else:
        marker_cells = [
            c for c in cells if c and not is_amount_token(c) and not is_code_token(c)
        ]
    if any(has_total_marker(c) for c in marker_cells):
        return RowKind.TOTAL
    if not any(is_amount_token(c) for c in cells) and not any(
        is_code_token(c) for c in cells
    ):
        return RowKind.HEADER
    return RowKind.DATA


def _normalize_digits(text: str) -> str:
    # Any character with a Unicode decimal value (Devanagari, Kannada, ...)
    # maps to its ASCII digit; everything else passes through.
    out = []
    for ch in text:
        dec = unicodedata.decimal(ch, None)
        out.append(str(dec) if dec is not None else ch)
    return "".join(out)


def parse_amount(text: str, unit: UnitContext) -> int:
    """Normalize a printed amount to a canonical integer in base units.

    Accepts Indian digit grouping ("1,23,456"), a decimal point, and
    non-Arabic decimal digits. The value is scaled by the unit and rounded
    half-away-from-zero.
    """
    token = text.strip()
    if not token:
        raise NotANumber("empty token")
    negative = token.startswith(("-", "−"))
    if negative:
        token = token[1:]
    plain = _normalize_digits(token).replace(",", "")
    if not _NUMERIC_RE.fullmatch(plain):
        raise NotANumber(text.strip())
    if negative:
        raise NegativeAmount(text.strip())
    scaled = Decimal(plain) * unit.scale
    return int(scaled.to_integral_value(rounding=ROUND_HALF_UP))


def render_amount(value: int, unit: UnitContext, grouped: bool = False) -> str:
    """Inverse of parse_amount for exactly representable values.

    With ``grouped`` the integer part gets Indian-style separators
    (last three digits, then pairs: 12,34,567).
    """
    if value < 0:
        raise NegativeAmount(str(value))
    quotient = Decimal(value) / Decimal(unit.scale)
    text = format(quotient, "f")
    if not grouped:
        return text
    int_part, _, frac = text.partition(".")
    if len(int_part) > 3:
        head, tail = int_part[:-3], int_part[-3:]
        pairs = []
        while len(head) > 2:
            pairs.append(head[-2:])
            head = head[:-2]
        if head:
            pairs.append(head)
        int_part = ",".join(reversed(pairs)) + "," + tail
    return int_part + ("." + frac if frac else "")


def parse_row(
    fields: list[str],
    archetype: SchemaArchetype,
    page: int,
    unit: UnitContext,
    line: int = 0,
) -> ExtractedRow:
    """Turn a conformant field list into a typed row.

    Empty amount cells become absent amounts; NotANumber from a bad amount
    cell is re-raised with the column name attached.
    """
    if len(fields) != len(archetype.column_layout):
        raise ColumnCountMismatch(
            f"expected {len(archetype.column_layout)} fields, got {len(fields)}"
        )
    cells = [c.strip() for c in fields]
    kind = classify_fields(cells)

    level_cells = cells[LEVEL_SLICE]
    last_filled = max((i for i, c in enumerate(level_cells) if c), default=-1)
    code_path = tuple(level_cells[: last_filled + 1])
    if len(code_path) > archetype.depth:
        raise InvalidFieldValue(
            f"code path of length {len(code_path)} exceeds archetype depth "
            f"{archetype.depth}"
        )
    if kind is RowKind.DATA and not code_path:
        raise InvalidFieldValue("Data row without level codes")

    category = cells[COL_CATEGORY] or None
    if category is not None and category not in CATEGORIES:
        raise InvalidFieldValue(f"category {category!r}")
    charge = cells[COL_CHARGE] or None
    if charge is not None and charge not in CHARGES:
        raise InvalidFieldValue(f"charge {charge!r}")

    amounts: list[int | None] = []
    for offset, cell in enumerate(cells[AMOUNT_SLICE]):
        if not cell:
            amounts.append(None)
            continue
        try:
            amounts.append(parse_amount(cell, unit))
        except NotANumber as exc:
            index = AMOUNT_SLICE.start + offset
            raise NotANumber(f"column {COLUMNS[index]!r} (index {index}): {exc}") from exc

    return ExtractedRow(
        page=page,
        line=line,
        kind=kind,
        code_path=code_path,
        description=cells[COL_DESCRIPTION],
        amounts=FiscalAmountSet(*amounts),
        category=category,
        charge=charge,
    )


def serialize_fields(fields: list[str]) -> str:
    """One CSV line, minimal quoting, no terminator.

    The wire format is line-based: fields must not contain newlines.
    """
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(fields)
    return buf.getvalue()


def split_fields(line: str) -> list[str]:
    """Inverse of serialize_fields for a single line."""
    return next(csv.reader([line]))


def row_to_fields(row: ExtractedRow, unit: UnitContext = UnitContext.UNIT) -> list[str]:
    """Render a typed row back to the 15-column field list.

    Amounts are printed in the given unit (exact division, no grouping), so
    re-parsing with the same unit reproduces the row.
    """
    level_cells = list(row.code_path) + [""] * (6 - len(row.code_path))
    amount_cells = [
        "" if v is None else render_amount(v, unit) for v in row.amounts.as_tuple()
    ]
    return [
        str(row.page),
        row.kind.value,
        *level_cells,
        row.description,
        row.category or "",
        row.charge or "",
        *amount_cells,
    ]
