"""Per-Major-Head labeled ordered trees built from cleaned archetype rows.

Node identity for structural comparison is (level, code) only; descriptions
and amounts ride along for the summation checks but never enter equality.
Sibling order is source order by default, with an opt-in code sort for
documents whose table order is not trustworthy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .core import (
    ExtractedRow,
    FiscalAmountSet,
    HierarchyLevel,
    LedgerliftError,
    RowKind,
    SchemaArchetype,
)

log = logging.getLogger(__name__)

# Synthetic code for a skipped intermediate level (legal in some states).
GAP_CODE = "—"


class InconsistentPath(LedgerliftError, ValueError):
    """Row evidence cannot form a rooted tree."""


class DuplicateTotal(LedgerliftError, ValueError):
    """Two rows attach different amounts to the same node."""


@dataclass
class FiscalNode:
    """One head in the tree. Children stay in first-appearance order."""

    level: HierarchyLevel
    code: str
    children: list["FiscalNode"] = field(default_factory=list)
    amounts: FiscalAmountSet | None = None
    amounts_from: RowKind | None = None
    description: str = ""
    source: tuple[int, int] = (0, 0)

    @property
    def label(self) -> tuple[HierarchyLevel, str]:
        return (self.level, self.code)


@dataclass
class FiscalTree:
    major_head: str
    root: FiscalNode
    archetype: SchemaArchetype


def tree_size(tree: FiscalTree) -> int:
    return sum(1 for _ in iter_nodes(tree.root))


def iter_nodes(node: FiscalNode):
    """Preorder traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def group_rows_by_major(rows: list[ExtractedRow]) -> dict[str, list[ExtractedRow]]:
    grouped: dict[str, list[ExtractedRow]] = {}
    for row in rows:
        if not row.code_path:
            continue
        grouped.setdefault(row.code_path[0], []).append(row)
    return grouped


def build_tree(
    rows: list[ExtractedRow],
    archetype: SchemaArchetype,
    major_head: str,
    sort_by_code: bool = False,
) -> FiscalTree:
    """Assemble the tree for one Major Head from its rows.

    Every distinct code-path prefix becomes exactly one node. Total rows
    attach their amounts to the node their path names; Data rows at the
    archetype's leaf depth attach amounts to leaves. A skipped level is
    materialized as a pass-through node with the synthetic gap code and
    logged, since downstream checks should still see the deeper structure.
    """
    if not rows:
        raise InconsistentPath(f"no rows for major head {major_head!r}")

    root: FiscalNode | None = None
    index: dict[tuple[str, ...], FiscalNode] = {}

    def node_at(path: tuple[str, ...], source: tuple[int, int]) -> FiscalNode:
        nonlocal root
        existing = index.get(path)
        if existing is not None:
            return existing
        level = HierarchyLevel(len(path))
        node = FiscalNode(level=level, code=path[-1], source=source)
        if len(path) == 1:
            root = node
        else:
            node_at(path[:-1], source).children.append(node)
        index[path] = node
        return node

    for row in rows:
        if row.code_path[0] != major_head:
            raise InconsistentPath(
                f"row at page {row.page} line {row.line} belongs to major "
                f"{row.code_path[0]!r}, not {major_head!r}"
            )
        path = tuple(c if c else GAP_CODE for c in row.code_path)
        if GAP_CODE in path:
            log.warning(
                "skipped level materialized at page %d line %d: %s",
                row.page,
                row.line,
                "/".join(path),
            )
        if path[0] == GAP_CODE:
            raise InconsistentPath(
                f"row at page {row.page} line {row.line} has no major head code"
            )
        node = node_at(path, (row.page, row.line))

        attach = row.kind is RowKind.TOTAL or (
            row.kind is RowKind.DATA and len(path) == archetype.depth
        )
        if not attach:
            continue
        if node.amounts is not None and node.amounts != row.amounts:
            raise DuplicateTotal(
                f"node {'/'.join(path)} already carries amounts; conflicting "
                f"row at page {row.page} line {row.line}"
            )
        node.amounts = row.amounts
        node.amounts_from = row.kind
        node.description = row.description
        node.source = (row.page, row.line)

    assert root is not None
    if sort_by_code:
        for node in iter_nodes(root):
            node.children.sort(key=lambda n: n.code)
    return FiscalTree(major_head=major_head, root=root, archetype=archetype)


def truncate_tree(tree: FiscalTree, depth: int) -> FiscalTree:
    """Drop every node deeper than ``depth``, preserving order."""
    if depth < 1:
        raise ValueError("depth must be >= 1")

    def copy_to(node: FiscalNode, level: int) -> FiscalNode:
        kept = (
            [copy_to(c, level + 1) for c in node.children] if level < depth else []
        )
        return FiscalNode(
            level=node.level,
            code=node.code,
            children=kept,
            amounts=node.amounts,
            amounts_from=node.amounts_from,
            description=node.description,
            source=node.source,
        )

    return FiscalTree(
        major_head=tree.major_head,
        root=copy_to(tree.root, 1),
        archetype=tree.archetype,
    )


def dump_tree(tree: FiscalTree) -> str:
    """Indented debug rendering, one ``level:code`` node per line."""
    lines: list[str] = []

    def walk(node: FiscalNode, indent: int) -> None:
        lines.append("  " * indent + f"{node.level.title}:{node.code}")
        for child in node.children:
            walk(child, indent + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"
