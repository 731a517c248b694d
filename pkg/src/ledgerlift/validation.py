"""Numerical consistency checks and the failure-location report.

Two check families: within one table, Object Head amounts summed against the
Detailed Head total in the same block; across tables, totals for one level
computed independently from two archetypes of the same document. A check is
one head with four per-column sub-matches, so a single Status line covers
the four periods.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AMOUNT_COLUMNS,
    ExtractedRow,
    HierarchyLevel,
    LedgerliftError,
    RowKind,
    sum_amounts,
)
from .hierarchy import FiscalTree, iter_nodes

OBJECT_DETAILED = "ObjectDetailed"
TWO_SOURCE_MINOR = "TwoSourceMinor"

PASS = "PASS"
FAIL = "FAIL"

# Keys are space-padded to this width in the human-readable failure block;
# tests pin the rendered bytes, so do not change it casually.
_KEY_WIDTH = 23


class EmptyResults(LedgerliftError, ValueError):
    """Pass rate over zero checks is undefined."""


@dataclass(frozen=True)
class ColumnMatch:
    column: str
    verdict: str
    expected: int
    actual: int


@dataclass(frozen=True)
class CheckResult:
    major_head: str
    description: str
    page: int
    status: str
    matches: tuple[ColumnMatch, ColumnMatch, ColumnMatch, ColumnMatch]
    check_type: str
    code_path: tuple[str, ...] = ()
    line: int = 0
    detail: str = ""


@dataclass(frozen=True)
class MissingTotal:
    """A node with children but no total row: reported, not a failure."""

    major_head: str
    code_path: tuple[str, ...]
    page: int


def _compare(
    expected: tuple[int, int, int, int],
    actual: tuple[int, int, int, int],
    tolerance: int,
) -> tuple[ColumnMatch, ...]:
    matches = []
    for column, e, a in zip(AMOUNT_COLUMNS, expected, actual):
        verdict = PASS if abs(e - a) <= tolerance else FAIL
        matches.append(ColumnMatch(column=column, verdict=verdict, expected=e, actual=a))
    return tuple(matches)


def _status(matches: tuple[ColumnMatch, ...]) -> str:
    return PASS if all(m.verdict == PASS for m in matches) else FAIL


def _present(amounts) -> tuple[int, int, int, int]:
    return tuple(v if v is not None else 0 for v in amounts.as_tuple())  # type: ignore[return-value]


def check_object_detailed(
    tree: FiscalTree, tolerance: int = 0
) -> tuple[list[CheckResult], list[MissingTotal]]:
    """Compare each Detailed Head total against the sum of its Object rows.

    Returns the check results plus the Detailed nodes that have children but
    never received a total row (reported separately, not counted as FAIL).
    """
    results: list[CheckResult] = []
    missing: list[MissingTotal] = []
    for node in iter_nodes(tree.root):
        if node.level is not HierarchyLevel.DETAILED_HEAD or not node.children:
            continue
        if node.amounts is None or node.amounts_from is not RowKind.TOTAL:
            missing.append(
                MissingTotal(
                    major_head=tree.major_head,
                    code_path=_path_of(tree, node),
                    page=node.source[0],
                )
            )
            continue
        expected = _present(node.amounts)
        actual = sum_amounts([c.amounts for c in node.children if c.amounts is not None])
        matches = _compare(expected, actual, tolerance)
        results.append(
            CheckResult(
                major_head=tree.major_head,
                description=node.description,
                page=node.source[0],
                status=_status(matches),
                matches=matches,
                check_type=OBJECT_DETAILED,
                code_path=_path_of(tree, node),
                line=node.source[1],
            )
        )
    return results, missing


def _path_of(tree: FiscalTree, target) -> tuple[str, ...]:
    def walk(node, acc):
        acc = acc + (node.code,)
        if node is target:
            return acc
        for child in node.children:
            found = walk(child, acc)
            if found is not None:
                return found
        return None

    return walk(tree.root, ()) or (tree.major_head,)


@dataclass(frozen=True)
class _SourceEntry:
    amounts: tuple[int, int, int, int]
    page: int
    line: int
    description: str


def totals_at_level(
    rows: list[ExtractedRow], level: HierarchyLevel
) -> dict[tuple[str, ...], _SourceEntry]:
    """Per-path amounts for one level from a single archetype table.

    Rows carrying amounts directly at the level win; otherwise deeper Data
    rows are aggregated by path prefix. The entry keeps the location of the
    direct row (or of the first contributing row for aggregates).
    """
    direct: dict[tuple[str, ...], _SourceEntry] = {}
    deeper: dict[tuple[str, ...], dict] = {}
    for row in rows:
        path = tuple(row.code_path)
        if len(path) == level.depth and row.kind in (RowKind.TOTAL, RowKind.DATA):
            entry = _SourceEntry(
                amounts=_present(row.amounts),
                page=row.page,
                line=row.line,
                description=row.description,
            )
            prior = direct.get(path)
            if prior is not None and prior.amounts != entry.amounts:
                raise LedgerliftError(
                    f"conflicting amounts for {'/'.join(path)} at page {row.page}"
                )
            direct.setdefault(path, entry)
        elif len(path) > level.depth and row.kind is RowKind.DATA:
            prefix = path[: level.depth]
            bucket = deeper.setdefault(
                prefix,
                {"sums": [0, 0, 0, 0], "page": row.page, "line": row.line},
            )
            for i, v in enumerate(_present(row.amounts)):
                bucket["sums"][i] += v

    out = dict(direct)
    for prefix, bucket in deeper.items():
        if prefix not in out:
            out[prefix] = _SourceEntry(
                amounts=tuple(bucket["sums"]),  # type: ignore[arg-type]
                page=bucket["page"],
                line=bucket["line"],
                description="",
            )
    return out


def check_two_source(
    level: HierarchyLevel,
    table_a: list[ExtractedRow],
    table_b: list[ExtractedRow],
    tolerance: int = 0,
) -> list[CheckResult]:
    """Cross-check one level's totals computed from two archetype tables.

    ``table_b`` is the side whose rows carry the level directly; its row
    locations and descriptions name the check. ``table_a`` supplies the
    independent value (usually an aggregate from a deeper table). A path
    present on only one side fails outright with the absent side recorded.
    """
    entries_a = totals_at_level(table_a, level)
    entries_b = totals_at_level(table_b, level)
    if not entries_a or not entries_b:
        raise LedgerliftError(f"a source does not cover level {level.title}")

    check_type = (
        TWO_SOURCE_MINOR
        if level is HierarchyLevel.MINOR_HEAD
        else f"TwoSource{level.title}"
    )
    results: list[CheckResult] = []
    for path in sorted(set(entries_a) | set(entries_b)):
        a = entries_a.get(path)
        b = entries_b.get(path)
        if a is not None and b is not None:
            matches = _compare(b.amounts, a.amounts, tolerance)
            status = _status(matches)
            detail = ""
        else:
            present = a if a is not None else b
            assert present is not None
            zeros = (0, 0, 0, 0)
            expected = present.amounts if b is not None else zeros
            actual = present.amounts if a is not None else zeros
            matches = tuple(
                ColumnMatch(column=c, verdict=FAIL, expected=e, actual=v)
                for c, e, v in zip(AMOUNT_COLUMNS, expected, actual)
            )
            status = FAIL
            detail = "absent from source " + ("A" if a is None else "B")
            b = present
        results.append(
            CheckResult(
                major_head=path[0],
                description=b.description,
                page=b.page,
                status=status,
                matches=matches,  # type: ignore[arg-type]
                check_type=check_type,
                code_path=path,
                line=b.line,
                detail=detail,
            )
        )
    return results


def pass_rate(results: list[CheckResult]) -> int:
    """Whole-number percent of passing checks; halves round up."""
    if not results:
        raise EmptyResults("no check results")
    passed = sum(1 for r in results if r.status == PASS)
    total = len(results)
    return (200 * passed + total) // (2 * total)


def failure_report(results: list[CheckResult]) -> str:
    """Human-readable blocks for every FAIL, ordered by (page, major head).

    The block layout is byte-stable: keys left-justified to a fixed width,
    one blank line between blocks.
    """
    failures = sorted(
        (r for r in results if r.status == FAIL),
        key=lambda r: (r.page, r.major_head, r.code_path),
    )
    blocks = []
    for r in failures:
        lines = [
            f"{'Major_Head':<{_KEY_WIDTH}}{r.major_head}",
            f"{'Description':<{_KEY_WIDTH}}{r.description}",
            f"{'Page':<{_KEY_WIDTH}}{r.page}",
            f"{'Status':<{_KEY_WIDTH}}{r.status}",
        ]
        for m in r.matches:
            lines.append(f"{m.column + '_Match':<{_KEY_WIDTH}}{m.verdict}")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def check_to_record(result: CheckResult) -> dict:
    """Machine-readable mirror of one check, same field names as the block."""
    record = {
        "Major_Head": result.major_head,
        "Description": result.description,
        "Page": result.page,
        "Status": result.status,
        "Check_Type": result.check_type,
        "Code_Path": list(result.code_path),
    }
    for m in result.matches:
        record[m.column + "_Match"] = m.verdict
        record[m.column + "_Expected"] = m.expected
        record[m.column + "_Actual"] = m.actual
    if result.detail:
        record["Detail"] = result.detail
    return record
