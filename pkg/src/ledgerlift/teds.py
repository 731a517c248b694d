"""Ordered tree edit distance over fiscal-head trees.

The distance is the classic Zhang-Shasha dynamic program over keyroots with
unit costs: insert 1, delete 1, relabel 1 when labels differ. The normalized
score reported by this artifact is a distance (0 means structurally
identical); the conventional similarity form is exposed alongside for
interoperability with table-structure tooling that expects 1 for identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .core import LedgerliftError
from .hierarchy import FiscalTree, tree_size


class EmptyScores(LedgerliftError, ValueError):
    """Accuracy over zero scores is undefined."""


@dataclass(frozen=True)
class StructureScore:
    """Distance between two archetypes' trees for one Major Head."""

    major_head: str
    pair: tuple[str, str]
    ted: int
    nted: Fraction

    @property
    def identical(self) -> bool:
        return self.nted == 0


def _default_children(node):
    return node.children


def _default_label(node):
    return node.label


class _Annotated:
    """Postorder arrays the Zhang-Shasha recurrence indexes into (1-based)."""

    def __init__(self, root, children, label):
        self.labels: list = [None]  # 1-based
        self.lmd: list[int] = [0]  # leftmost leaf descendant per node

        def walk(node) -> int:
            first_leaf = 0
            for child in children(node):
                child_lmd = walk(child)
                if first_leaf == 0:
                    first_leaf = child_lmd
            self.labels.append(label(node))
            index = len(self.labels) - 1
            self.lmd.append(first_leaf or index)
            return self.lmd[index]

        walk(root)
        self.size = len(self.labels) - 1
        seen: dict[int, int] = {}
        for i in range(1, self.size + 1):
            seen[self.lmd[i]] = i  # later index wins: the keyroot
        self.keyroots = sorted(seen.values())


def ordered_ted(root_a, root_b, children=_default_children, label=_default_label) -> int:
    """Unit-cost edit distance between two ordered labeled trees."""
    a = _Annotated(root_a, children, label)
    b = _Annotated(root_b, children, label)
    td = [[0] * (b.size + 1) for _ in range(a.size + 1)]

    for i in a.keyroots:
        for j in b.keyroots:
            ioff = a.lmd[i] - 1
            joff = b.lmd[j] - 1
            m = i - ioff
            n = j - joff
            fd = [[0] * (n + 1) for _ in range(m + 1)]
            for x in range(1, m + 1):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, n + 1):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, m + 1):
                for y in range(1, n + 1):
                    if a.lmd[x + ioff] == a.lmd[i] and b.lmd[y + joff] == b.lmd[j]:
                        relabel = 0 if a.labels[x + ioff] == b.labels[y + joff] else 1
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[x - 1][y - 1] + relabel,
                        )
                        td[x + ioff][y + joff] = fd[x][y]
                    else:
                        p = a.lmd[x + ioff] - 1 - ioff
                        q = b.lmd[y + joff] - 1 - joff
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[p][q] + td[x + ioff][y + joff],
                        )

    return td[a.size][b.size]


def tree_edit_distance(a: FiscalTree, b: FiscalTree) -> int:
    """Edit distance between two fiscal trees on (level, code) labels."""
    return ordered_ted(a.root, b.root)


def nted(a: FiscalTree, b: FiscalTree) -> Fraction:
    """Normalized distance: ted / max(node counts), clamped into [0, 1].

    The raw ratio exceeds 1 only for trees so unrelated that edits cost
    more than the larger tree's size; every such pair is "maximally
    different", which the clamp encodes. Zero iff identical.
    """
    raw = Fraction(tree_edit_distance(a, b), max(tree_size(a), tree_size(b)))
    return min(raw, Fraction(1))


def similarity(a: FiscalTree, b: FiscalTree) -> Fraction:
    """Conventional similarity form: 1 for identical trees."""
    return 1 - nted(a, b)


def score_pair(a: FiscalTree, b: FiscalTree) -> StructureScore:
    return StructureScore(
        major_head=a.major_head,
        pair=(a.archetype.name, b.archetype.name),
        ted=tree_edit_distance(a, b),
        nted=nted(a, b),
    )


def structural_accuracy(scores: list[StructureScore]) -> float:
    """Percentage of zero-distance pairs, two decimals, half-up rounding."""
    if not scores:
        raise EmptyScores("no structure scores")
    zero = sum(1 for s in scores if s.nted == 0)
    percent = Decimal(100 * zero) / Decimal(len(scores))
    return float(percent.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
