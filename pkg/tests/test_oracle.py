from fractions import Fraction

import pytest

from spunsplit import (
    Commodity,
    Instance,
    Multiflow,
    OracleCapError,
    check_conservation,
    enumerate_paths,
    exhaustive_feasibility,
    matrix_decomposability_probe,
    total_flow,
)
from spunsplit.core import Digraph
from spunsplit.oracle import routing_cap, ENUM_CAP_ENV


def _diamond():
    return Digraph.build(
        ["s", "a", "b", "t"],
        [("e1", "s", "a"), ("e2", "s", "b"), ("e3", "a", "t"),
         ("e4", "b", "t"), ("e5", "a", "b")])


def test_enumerate_paths_lexicographic():
    g = _diamond()
    paths = enumerate_paths(g, "s", "t")
    assert paths == [("e1", "e3"), ("e1", "e5", "e4"), ("e2", "e4")]


def test_enumerate_paths_restricted():
    g = _diamond()
    paths = enumerate_paths(g, "s", "t",
                            allowed=frozenset({"e1", "e3", "e2", "e4"}))
    assert paths == [("e1", "e3"), ("e2", "e4")]


def test_enumerate_paths_cap():
    g = _diamond()
    with pytest.raises(OracleCapError):
        enumerate_paths(g, "s", "t", cap=2)


def test_routing_cap_env(monkeypatch):
    monkeypatch.setenv(ENUM_CAP_ENV, "17")
    assert routing_cap() == 17
    monkeypatch.delenv(ENUM_CAP_ENV)
    assert routing_cap() == 1_000_000


def test_exhaustive_feasibility_positive():
    g = Digraph.build(["u", "v"],
                      [("e", "u", "v"), ("f", "u", "v")],
                      {"e": 1, "f": 2})
    inst = Instance.build(g, "u", "v",
                          [Commodity(1, "u", "v", Fraction(1)),
                           Commodity(2, "u", "v", Fraction(2))])
    X = exhaustive_feasibility(inst)
    assert isinstance(X, Multiflow)
    assert check_conservation(inst, X) is None
    totals = total_flow(X, g.arc_ids())
    assert totals["e"] <= 1 and totals["f"] <= 2


def test_exhaustive_feasibility_negative(fig1):
    inst, _ = fig1
    assert exhaustive_feasibility(inst) is None


def test_probe_counterexample(counterexample):
    inst, X = counterexample
    cert = matrix_decomposability_probe(inst, X)
    assert cert is not None
    assert cert.forced == ("e1", "e2", "e3")
    assert cert.tried == 8


def test_probe_requires_integral_demands():
    g = Digraph.build(["u", "v"], [("e", "u", "v")])
    inst = Instance.build(g, "u", "v",
                          [Commodity(1, "u", "v", Fraction(1, 2))])
    with pytest.raises(Exception):
        matrix_decomposability_probe(inst, Multiflow({("e", 1):
                                                      Fraction(1, 2)}))


def test_probe_inconclusive_on_integral_matrix():
    g = Digraph.build(["u", "v"], [("e", "u", "v"), ("f", "u", "v")])
    inst = Instance.build(g, "u", "v",
                          [Commodity(1, "u", "v", Fraction(1))])
    X = Multiflow.from_rows({"e": {1: 1}})
    assert matrix_decomposability_probe(inst, X) is None


def test_probe_example1_rounding_gap(example1):
    # The worked decomposition needs members deviating by more than the
    # per-arc rounding interval, so the stricter probe must fail.
    inst, X = example1
    assert matrix_decomposability_probe(inst, X) is not None


def test_routing_product_cap(counterexample):
    inst, X = counterexample
    with pytest.raises(OracleCapError):
        exhaustive_feasibility(inst, cap=3)
