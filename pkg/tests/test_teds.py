import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from _oracles import PlainNode, all_trees, mapping_ted, structurally_equal
from ledgerlift.core import ARCHETYPES, HierarchyLevel
from ledgerlift.hierarchy import FiscalNode, FiscalTree
from ledgerlift.teds import (
    EmptyScores,
    StructureScore,
    nted,
    ordered_ted,
    similarity,
    structural_accuracy,
    tree_edit_distance,
)


def _fiscal(root: FiscalNode) -> FiscalTree:
    return FiscalTree(major_head=root.code, root=root, archetype=ARCHETYPES["MinorHead"])


def _node(code, *children, depth=1):
    return FiscalNode(
        level=HierarchyLevel(depth),
        code=code,
        children=[c for c in children],
    )


def test_identical_trees_have_zero_distance():
    a = _fiscal(_node("2039", _node("01", depth=2), _node("02", depth=2)))
    b = _fiscal(_node("2039", _node("01", depth=2), _node("02", depth=2)))
    assert tree_edit_distance(a, b) == 0
    assert nted(a, b) == 0
    assert similarity(a, b) == 1


def test_single_node_relabel_costs_one():
    a, b = PlainNode("A"), PlainNode("B")
    assert mapping_ted(a, b) == 1  # oracle agrees the edit is one relabel
    assert ordered_ted(a, b) == 1


def test_dropping_one_child_costs_one():
    wide = PlainNode("r", PlainNode("x"), PlainNode("y"))
    narrow = PlainNode("r", PlainNode("x"))
    assert mapping_ted(wide, narrow) == 1
    assert ordered_ted(wide, narrow) == 1


def test_nted_examples():
    a = _fiscal(_node("A"))
    b = _fiscal(_node("B"))
    assert nted(a, b) == Fraction(1)

    wide = _fiscal(_node("r", _node("x", depth=2), _node("y", depth=2)))
    narrow = _fiscal(_node("r", _node("x", depth=2)))
    assert nted(wide, narrow) == Fraction(1, 3)


def test_exhaustive_oracle_on_three_node_trees():
    trees = all_trees(3, "AB")
    for a in trees:
        for b in trees:
            assert ordered_ted(a, b) == mapping_ted(a, b)


def test_zero_distance_means_structural_equality():
    trees = all_trees(3, "AB")
    for a in trees:
        for b in trees:
            if ordered_ted(a, b) == 0:
                assert structurally_equal(a, b)


def _random_tree(rng: random.Random, size: int) -> PlainNode:
    nodes = [PlainNode(rng.choice("ABC"))]
    for _ in range(size - 1):
        child = PlainNode(rng.choice("ABC"))
        rng.choice(nodes).children.append(child)
        nodes.append(child)
    return nodes[0]


def test_random_trees_match_oracle():
    rng = random.Random(2024)
    for _ in range(60):
        a = _random_tree(rng, rng.randint(1, 6))
        b = _random_tree(rng, rng.randint(1, 6))
        assert ordered_ted(a, b) == mapping_ted(a, b)


@st.composite
def plain_trees(draw, max_nodes=7):
    size = draw(st.integers(min_value=1, max_value=max_nodes))
    rng = random.Random(draw(st.integers(min_value=0, max_value=2**32)))
    return _random_tree(rng, size)


@given(t=plain_trees())
def test_self_distance_is_zero(t):
    assert ordered_ted(t, t) == 0


@given(a=plain_trees(), b=plain_trees())
def test_distance_is_symmetric(a, b):
    assert ordered_ted(a, b) == ordered_ted(b, a)


@settings(max_examples=40)
@given(a=plain_trees(5), b=plain_trees(5), c=plain_trees(5))
def test_triangle_inequality(a, b, c):
    assert ordered_ted(a, c) <= ordered_ted(a, b) + ordered_ted(b, c)


def _count(node: PlainNode) -> int:
    return 1 + sum(_count(c) for c in node.children)


@given(a=plain_trees(), b=plain_trees())
def test_normalization_bounds(a, b):
    ta = _fiscal_from_plain(a)
    tb = _fiscal_from_plain(b)
    value = nted(ta, tb)
    assert 0 <= value <= 1


def _fiscal_from_plain(node: PlainNode, depth=1) -> FiscalTree:
    def convert(n, d):
        return FiscalNode(
            level=HierarchyLevel(min(d, 6)),
            code=str(n.label),
            children=[convert(c, d + 1) for c in n.children],
        )

    return _fiscal(convert(node, depth))


def test_truncated_deep_tree_scores_zero_against_every_shallow_table(small_rows):
    from ledgerlift.hierarchy import build_tree, group_rows_by_major, truncate_tree

    object_grouped = group_rows_by_major(small_rows["ObjectHead"])
    for name, depth in (("SubMajorHead", 2), ("MinorHead", 3), ("SubHead", 4), ("DetailedHead", 5)):
        for major, rows in group_rows_by_major(small_rows[name]).items():
            shallow = build_tree(rows, ARCHETYPES[name], major)
            deep = build_tree(object_grouped[major], ARCHETYPES["ObjectHead"], major)
            assert nted(truncate_tree(deep, depth), shallow) == 0


class TestStructuralAccuracy:
    @staticmethod
    def _scores(zero: int, total: int):
        out = []
        for i in range(total):
            distance = 0 if i < zero else 1
            out.append(
                StructureScore(
                    major_head="2039",
                    pair=("MinorHead", "ObjectHead"),
                    ted=distance,
                    nted=Fraction(distance, 10),
                )
            )
        return out

    def test_twenty_of_twentyone(self):
        assert structural_accuracy(self._scores(20, 21)) == 95.24

    def test_fourteen_of_nineteen(self):
        assert structural_accuracy(self._scores(14, 19)) == 73.68

    def test_all_zero(self):
        assert structural_accuracy(self._scores(10, 10)) == 100.00

    def test_empty_raises(self):
        with pytest.raises(EmptyScores):
            structural_accuracy([])
