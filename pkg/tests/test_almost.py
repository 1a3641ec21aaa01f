import random
from fractions import Fraction

import pytest

from spunsplit import (
    Commodity,
    Instance,
    Multiflow,
    SwapError,
    check_conservation,
    demand_shares,
    flow_carrying_path,
    make_almost_unsplittable,
    reduce_shared_fractional,
    swap,
    total_flow,
)
from spunsplit.core import Digraph

from conftest import random_instance


def _two_arc_instance():
    g = Digraph.build(["u", "v"], [("e", "u", "v"), ("f", "u", "v")])
    inst = Instance.build(g, "u", "v",
                          [Commodity(1, "u", "v", Fraction(1)),
                           Commodity(2, "u", "v", Fraction(1))])
    X = Multiflow.from_rows({
        "e": {1: "1/2", 2: "1/2"},
        "f": {1: "1/2", 2: "1/2"},
    })
    return inst, X


def test_flow_carrying_path(example1):
    inst, X = example1
    path = flow_carrying_path(inst, X, 2, inst.tree.root)
    assert path[0] == "e1"
    assert all(X.get(aid, 2) > 0 for aid in path)


def test_flow_carrying_path_prefers_smaller_arc(example1):
    inst, X = example1
    # Commodity 2 uses both e2 and e3 below the middle node.
    nid = inst.tree.node_with_arcs({"e2", "e3", "e4"})
    assert flow_carrying_path(inst, X, 2, nid) == ["e2"]


def test_swap_preserves_totals_and_unsplits():
    inst, X = _two_arc_instance()
    before = total_flow(X, inst.graph.arc_ids())
    Y = swap(inst, X, inst.tree.root, 1, 2)
    assert total_flow(Y, inst.graph.arc_ids()) == before
    assert check_conservation(inst, Y) is None
    c1, c2 = inst.tree.children(inst.tree.root)
    f1 = demand_shares(inst, Y, c1).fractional()
    f2 = demand_shares(inst, Y, c2).fractional()
    assert not f1 & f2


def test_swap_preconditions():
    inst, X = _two_arc_instance()
    leaf = inst.tree.children(inst.tree.root)[0]
    with pytest.raises(SwapError):
        swap(inst, X, leaf, 1, 2)
    with pytest.raises(SwapError):
        swap(inst, X, inst.tree.root, 1, 1)
    unsplit = Multiflow.from_rows({"e": {1: 1}, "f": {2: 1}})
    with pytest.raises(SwapError):
        swap(inst, unsplit, inst.tree.root, 1, 2)


def test_reduce_shared_fractional():
    inst, X = _two_arc_instance()
    Y = reduce_shared_fractional(inst, X, inst.tree.root)
    c1, c2 = inst.tree.children(inst.tree.root)
    shared = demand_shares(inst, Y, c1).fractional() \
        & demand_shares(inst, Y, c2).fractional()
    assert len(shared) <= 1


def test_example1_already_in_shape(example1):
    inst, X = example1
    result = make_almost_unsplittable(inst, X)
    assert result.flow == X
    nid = inst.tree.node_with_arcs({"e3", "e4"})
    assert result.fractional[nid] == (2, 6)


def test_make_almost_unsplittable_random():
    rng = random.Random(61)
    for _ in range(25):
        inst, X = random_instance(rng, max_arcs=15, max_commodities=6)
        before = total_flow(X, inst.graph.arc_ids())
        result = make_almost_unsplittable(inst, X)
        Y = result.flow
        assert check_conservation(inst, Y) is None
        assert total_flow(Y, inst.graph.arc_ids()) == before
        tree = inst.tree
        for nid in tree.preorder():
            assert len(demand_shares(inst, Y, nid).fractional()) <= 2
            if tree.node(nid).kind == 'P':
                c1, c2 = tree.children(nid)
                shared = demand_shares(inst, Y, c1).fractional() \
                    & demand_shares(inst, Y, c2).fractional()
                assert len(shared) <= 1
        # Idempotence: a second pass changes nothing.
        again = make_almost_unsplittable(inst, Y)
        assert again.flow == Y
