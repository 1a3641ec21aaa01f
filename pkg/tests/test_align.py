import random
from fractions import Fraction

import pytest

from spunsplit import (
    Commodity,
    Instance,
    InfeasibleCut,
    Multiflow,
    align_instance,
    check_conservation,
    feasible_integer_multiflow,
    find_mandatory_node,
    integer_decomposition,
    is_aligned,
    map_flow_back,
    multiflow_from_transshipment,
    solve_transshipment,
    to_transshipment,
    total_flow,
)
from spunsplit.core import Digraph

from conftest import load_fixture, random_instance


def test_is_aligned_fig1(fig1):
    inst, _ = fig1
    c1, c2 = inst.commodities
    assert is_aligned(inst, c1)          # (s1, t1) labels a series node
    assert not is_aligned(inst, c2)


def test_find_mandatory_node_fig1(fig1):
    inst, _ = fig1
    assert find_mandatory_node(inst, 2) == "t1"


def test_align_fig1(fig1):
    inst, _ = fig1
    aligned, amap = align_instance(inst)
    assert amap.chains == {1: (1,), 2: (2, 3)}
    assert [s.node for s in amap.splits] == ["t1"]
    assert all(is_aligned(aligned, c) for c in aligned.commodities)
    sources = {c.source for c in aligned.commodities}
    sinks = {c.sink for c in aligned.commodities}
    assert not sources & sinks
    split_arc = amap.splits[0].arc_id
    assert aligned.graph.capacity(split_arc) is None


def test_align_noop_when_already_aligned(example1):
    inst, _ = example1
    aligned, amap = align_instance(inst)
    assert not amap.splits
    assert all(chain == (cid,) for cid, chain in amap.chains.items())
    assert aligned.graph.arc_ids() == inst.graph.arc_ids()


def test_transshipment_excesses(example1):
    inst, _ = example1
    b = to_transshipment(inst).b
    assert b == {"u0": Fraction(10), "v": Fraction(0), "v0": Fraction(-10)}


def test_splitting_can_destroy_feasibility():
    # Before alignment the pooled excesses admit a flow; the split that
    # separates the shared source/sink node removes the accidental
    # cancellation and exposes the infeasibility.
    inst, _ = load_fixture("cancellation")
    raw = solve_transshipment(inst.graph, to_transshipment(inst).b)
    assert isinstance(raw, dict)
    aligned, _ = align_instance(inst)
    split = solve_transshipment(aligned.graph, to_transshipment(aligned).b)
    assert isinstance(split, InfeasibleCut)
    assert "m#out" in split.nodes


def test_solve_transshipment_rejects_unbalanced():
    g = Digraph.build(["u", "v"], [("e", "u", "v")], {"e": 1})
    with pytest.raises(Exception):
        solve_transshipment(g, {"u": Fraction(1), "v": Fraction(0)})


def test_multiflow_from_transshipment_roundtrip(example1):
    inst, X = example1
    totals = total_flow(X, inst.graph.arc_ids())
    Y = multiflow_from_transshipment(inst, totals)
    assert check_conservation(inst, Y) is None
    assert total_flow(Y, inst.graph.arc_ids()) == totals


def test_feasible_integer_multiflow_fig1(fig1):
    inst, _ = fig1
    result = feasible_integer_multiflow(inst)
    assert isinstance(result, InfeasibleCut)
    assert result.nodes           # non-empty witness in original names
    assert result.nodes <= frozenset(inst.graph.nodes)


def test_feasible_integer_multiflow_simple():
    g = Digraph.build(["u", "v"],
                      [("e", "u", "v"), ("f", "u", "v")],
                      {"e": 1, "f": 1})
    inst = Instance.build(g, "u", "v",
                          [Commodity(1, "u", "v", Fraction(1)),
                           Commodity(2, "u", "v", Fraction(1))])
    X = feasible_integer_multiflow(inst)
    assert isinstance(X, Multiflow)
    assert check_conservation(inst, X) is None
    assert all(v.denominator == 1 for _, v in X.items())
    totals = total_flow(X, inst.graph.arc_ids())
    assert all(totals[aid] <= 1 for aid in ("e", "f"))


def test_integer_decomposition_fixture(example1):
    inst, X = example1
    b = to_transshipment(inst).b
    y = total_flow(X, inst.graph.arc_ids())
    terms = integer_decomposition(inst.graph, b, y)
    assert sum(w for w, _ in terms) == 1
    recon = {aid: Fraction(0) for aid in inst.graph.arc_ids()}
    for w, flow in terms:
        assert w > 0
        for aid in recon:
            val = flow[aid]
            assert val.denominator == 1
            assert abs(val - y[aid]) < 1
            recon[aid] += w * val
    assert recon == y


def test_integer_decomposition_random():
    rng = random.Random(23)
    for _ in range(20):
        inst, X = random_instance(rng, max_arcs=12, max_commodities=4)
        if any(c.demand.denominator != 1 for c in inst.commodities):
            continue
        b = to_transshipment(inst).b
        y = total_flow(X, inst.graph.arc_ids())
        terms = integer_decomposition(inst.graph, b, y)
        recon = {aid: Fraction(0) for aid in y}
        for w, flow in terms:
            for aid in y:
                recon[aid] += w * flow[aid]
        assert recon == y


def test_alignment_random_postconditions():
    rng = random.Random(37)
    for _ in range(25):
        inst, X = random_instance(rng, max_arcs=15, max_commodities=5)
        aligned, amap = align_instance(inst)
        assert all(is_aligned(aligned, c) for c in aligned.commodities)
        sources = {c.source for c in aligned.commodities}
        sinks = {c.sink for c in aligned.commodities}
        assert not sources & sinks
        # Subcommodity chains cover each original demand end to end.
        for c in inst.commodities:
            chain = [aligned.commodity(i) for i in amap.chains[c.id]]
            assert all(s.demand == c.demand for s in chain)
            assert amap.original_node(chain[0].source) == c.source
            assert amap.original_node(chain[-1].sink) == c.sink
            for first, second in zip(chain, chain[1:]):
                assert amap.original_node(first.sink) \
                    == amap.original_node(second.source)


def test_pipeline_roundtrip_random():
    rng = random.Random(41)
    checked = 0
    while checked < 15:
        inst, X = random_instance(rng, max_arcs=12, max_commodities=4)
        # Capacities equal to the totals of a known flow keep the
        # instance feasible by construction.
        totals = total_flow(X, inst.graph.arc_ids())
        g = Digraph.build(inst.graph.nodes,
                          [(a.id, a.tail, a.head) for a in inst.graph.arcs],
                          totals)
        capped = Instance.build(g, inst.source, inst.sink, inst.commodities)
        aligned, amap = align_instance(capped)
        solved = solve_transshipment(aligned.graph, to_transshipment(aligned).b)
        assert isinstance(solved, dict)
        Y = map_flow_back(capped, amap,
                          multiflow_from_transshipment(aligned, solved))
        assert check_conservation(capped, Y) is None
        out = total_flow(Y, g.arc_ids())
        assert all(out[aid] <= totals[aid] for aid in out)
        checked += 1
