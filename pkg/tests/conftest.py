"""Shared fixtures: corpus files and random instance generation."""
from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import pytest

from spunsplit import Commodity, Digraph, Instance, Multiflow
from spunsplit.cli import load_instance

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str, require_sp: bool = True):
    return load_instance(FIXTURES / f"{name}.json", require_sp=require_sp)


@pytest.fixture
def example1():
    return load_fixture("example1")


@pytest.fixture
def fig1():
    return load_fixture("fig1")


@pytest.fixture
def counterexample():
    return load_fixture("counterexample")


def random_sp_graph(rng: random.Random, n_arcs: int
                    ) -> tuple[list[str], list[tuple[str, str, str]]]:
    """Random series-parallel digraph between 'src' and 'dst'."""
    nodes = ["src", "dst"]
    arcs: list[tuple[str, str, str]] = []

    def build(u: str, v: str, k: int) -> None:
        if k == 1:
            arcs.append((f"a{len(arcs) + 1}", u, v))
            return
        k1 = rng.randint(1, k - 1)
        if rng.random() < 0.5:
            m = f"n{len(nodes) - 1}"
            nodes.append(m)
            build(u, m, k1)
            build(m, v, k - k1)
        else:
            build(u, v, k1)
            build(u, v, k - k1)

    build("src", "dst", n_arcs)
    return nodes, arcs


def _reach_from(g: Digraph, start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for a in g.out_arcs(v):
            if a.head not in seen:
                seen.add(a.head)
                stack.append(a.head)
    return seen


def random_path(rng: random.Random, g: Digraph, s: str, t: str) -> list[str]:
    """Random walk restricted to arcs from which t stays reachable."""
    reaches_t = {v for v in g.nodes if t in _reach_from(g, v)}
    path = []
    at = s
    while at != t:
        options = [a for a in g.out_arcs(at) if a.head in reaches_t]
        a = rng.choice(options)
        path.append(a.id)
        at = a.head
    return path


def random_instance(rng: random.Random, max_arcs: int = 30,
                    max_commodities: int = 8,
                    integer_demands: bool = False
                    ) -> tuple[Instance, Multiflow]:
    """Random SP instance with a conserving multiflow built from random
    path decompositions.  Capacities are left unset; they play no role
    in the decomposition pipeline."""
    nodes, arcs = random_sp_graph(rng, rng.randint(1, max_arcs))
    g = Digraph.build(nodes, arcs, None)
    reach = {v: _reach_from(g, v) for v in nodes}
    pairs = [(u, v) for u in nodes for v in nodes
             if u != v and v in reach[u]]
    commodities = []
    for cid in range(1, rng.randint(1, max_commodities) + 1):
        u, v = rng.choice(pairs)
        denom = 1 if integer_demands else rng.choice([1, 1, 2, 4])
        commodities.append(Commodity(cid, u, v,
                                     Fraction(rng.randint(1, 8), denom)))
    inst = Instance.build(g, "src", "dst", commodities)

    values: dict[tuple[str, int], Fraction] = {}
    for c in commodities:
        parts = [Fraction(rng.randint(1, 5)) for _ in range(rng.randint(1, 3))]
        total = sum(parts)
        for part in parts:
            amount = c.demand * part / total
            for aid in random_path(rng, g, c.source, c.sink):
                key = (aid, c.id)
                values[key] = values.get(key, Fraction(0)) + amount
    return inst, Multiflow(values)


def random_small_capacitated(rng: random.Random
                             ) -> Instance | None:
    """SP instance on at most 6 nodes, capacities and demands in {1, 2},
    at most 3 commodities; None when the size draw comes out too big."""
    nodes, arcs = random_sp_graph(rng, rng.randint(1, 7))
    if len(nodes) > 6:
        return None
    caps = {aid: Fraction(rng.choice([1, 2])) for aid, _, _ in arcs}
    g = Digraph.build(nodes, arcs, caps)
    reach = {v: _reach_from(g, v) for v in nodes}
    pairs = [(u, v) for u in nodes for v in nodes
             if u != v and v in reach[u]]
    commodities = [Commodity(cid, *rng.choice(pairs),
                             Fraction(rng.choice([1, 2])))
                   for cid in range(1, rng.randint(1, 3) + 1)]
    return Instance.build(g, "src", "dst", commodities)
