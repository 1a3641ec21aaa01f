import random

import pytest

from spunsplit import (
    Digraph,
    GraphError,
    NotSeriesParallelError,
    recognize_sp,
)
from spunsplit.core import rat, positive_part, second_max

from conftest import random_sp_graph
from fractions import Fraction


def test_rat_coercions():
    assert rat(3) == Fraction(3)
    assert rat("3/4") == Fraction(3, 4)
    assert rat(Fraction(1, 2)) == Fraction(1, 2)


def test_positive_part():
    assert positive_part(Fraction(-1, 2)) == 0
    assert positive_part(Fraction(1, 2)) == Fraction(1, 2)


def test_second_max():
    assert second_max([Fraction(1), Fraction(3), Fraction(2)]) == 2
    assert second_max([Fraction(5), Fraction(5)]) == 5
    with pytest.raises(ValueError):
        second_max([Fraction(1)])


def test_digraph_validation():
    with pytest.raises(GraphError):
        Digraph.build(["a"], [("e", "a", "a")])
    with pytest.raises(GraphError):
        Digraph.build(["a", "b"], [("e", "a", "b"), ("e", "a", "b")])
    with pytest.raises(GraphError):
        Digraph.build(["a", "b"], [("e", "a", "c")])
    with pytest.raises(GraphError):
        Digraph.build(["a", "b"], [("e", "a", "b")], {"e": "-1"})


def test_recognize_single_arc():
    g = Digraph.build(["u", "v"], [("e", "u", "v")])
    tree = recognize_sp(g, "u", "v")
    root = tree.node(tree.root)
    assert root.kind == 'Q' and root.arc_id == "e"
    assert tree.label(tree.root) == ("u", "v")


def test_recognize_canonical_shape(example1):
    inst, _ = example1
    tree = inst.tree
    root = tree.node(tree.root)
    assert root.kind == 'P'
    # Children ordered by smallest contained arc id, ids by preorder.
    c1, c2 = root.children
    assert min(tree.arc_set(c1)) == "e1"
    assert tree.node(c1).kind == 'S'
    assert tree.arc_set(c2) == frozenset({"e5", "e6"})
    # The series chain keeps its start-side component first.
    s1, s2 = tree.node(c1).children
    assert tree.arc_set(s1) == frozenset({"e1"})
    assert tree.label(s2) == ("v", "v0")
    # Nested parallel folding: P(e2, P(e3, e4)).
    inner = tree.node(s2)
    assert inner.kind == 'P'
    i1, i2 = inner.children
    assert tree.arc_set(i1) == frozenset({"e2"})
    assert tree.arc_set(i2) == frozenset({"e3", "e4"})


def test_recognize_rejects_wheatstone():
    g = Digraph.build(
        ["u", "a", "b", "t"],
        [("e1", "u", "a"), ("e2", "u", "b"), ("e3", "a", "b"),
         ("e4", "a", "t"), ("e5", "b", "t")])
    with pytest.raises(NotSeriesParallelError) as info:
        recognize_sp(g, "u", "t")
    kernel = info.value.kernel
    assert set(kernel.nodes) == {"u", "a", "b", "t"}
    assert len(kernel.arcs) == 5


def test_recognize_wrong_terminals():
    g = Digraph.build(["u", "m", "v"],
                      [("e1", "u", "m"), ("e2", "m", "v")])
    with pytest.raises(NotSeriesParallelError):
        recognize_sp(g, "u", "m")


def test_tree_helpers(fig1):
    inst, _ = fig1
    tree = inst.tree
    labels = {tree.label(n) for n in tree.nodes}
    assert ("s1", "t1") in labels        # composite of a1 and a3
    assert tree.label(tree.root) == ("s1", "t2")
    assert tree.inner_nodes(tree.root) == frozenset({"s2", "t1"})
    leaf = tree.leaf_of_arc("a3")
    assert tree.label(leaf) == ("s2", "t1")
    assert tree.node_with_arcs({"a1", "a3", "a4"}) != tree.root
    assert tree.preorder()[0] == tree.root
    assert tree.postorder()[-1] == tree.root


def test_recognize_random_roundtrip():
    rng = random.Random(7)
    for _ in range(50):
        nodes, arcs = random_sp_graph(rng, rng.randint(1, 20))
        g = Digraph.build(nodes, arcs)
        tree = recognize_sp(g, "src", "dst")
        assert tree.label(tree.root) == ("src", "dst")
        assert tree.arc_set(tree.root) == frozenset(a.id for a in g.arcs)
        leaves = [n for n in tree.nodes if tree.is_leaf(n)]
        assert len(leaves) == len(g.arcs)
        for nid in tree.nodes:
            node = tree.node(nid)
            if node.kind == 'S':
                c1, c2 = node.children
                assert tree.node(c1).u == node.u
                assert tree.node(c2).v == node.v
                assert tree.node(c1).v == tree.node(c2).u
            elif node.kind == 'P':
                c1, c2 = node.children
                assert tree.label(c1) == tree.label(c2) == tree.label(nid)
                assert min(tree.arc_set(c1)) < min(tree.arc_set(c2))
