"""Multiflow instances, flow matrices and per-tree-node demand shares."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional

from .core import Arc, Digraph, GraphError, Rational, RationalLike, SpTree, \
    rat, recognize_sp

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class Commodity:
    id: int
    source: str
    sink: str
    demand: Fraction

    def __post_init__(self) -> None:
        if self.source == self.sink:
            raise GraphError(f"commodity {self.id}: source equals sink")
        if self.demand <= 0:
            raise GraphError(f"commodity {self.id}: demand must be positive")


def _reachable(g: Digraph, start: str,
               forbidden_arcs: frozenset[str] = frozenset()) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for a in g.out_arcs(v):
            if a.id in forbidden_arcs or a.head in seen:
                continue
            seen.add(a.head)
            stack.append(a.head)
    return seen


@dataclass(frozen=True)
class Instance:
    graph: Digraph
    source: str
    sink: str
    commodities: tuple[Commodity, ...]
    tree: Optional[SpTree] = None

    @staticmethod
    def build(graph: Digraph, source: str, sink: str,
              commodities: Iterable[Commodity],
              require_sp: bool = True) -> "Instance":
        comms = tuple(commodities)
        ids = [c.id for c in comms]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate commodity ids")
        for c in comms:
            if c.source not in graph.nodes or c.sink not in graph.nodes:
                raise GraphError(f"commodity {c.id}: unknown endpoint")
            if c.sink not in _reachable(graph, c.source):
                raise GraphError(
                    f"commodity {c.id}: sink unreachable from source")
        tree = recognize_sp(graph, source, sink) if require_sp else None
        return Instance(graph, source, sink, comms, tree)

    @property
    def d_max(self) -> Fraction:
        return max(c.demand for c in self.commodities)

    def commodity(self, cid: int) -> Commodity:
        for c in self.commodities:
            if c.id == cid:
                return c
        raise GraphError(f"unknown commodity {cid}")

    def demand(self, cid: int) -> Fraction:
        return self.commodity(cid).demand


class Multiflow:
    """Sparse arcs-by-commodities matrix of non-negative rationals."""

    __slots__ = ("_values",)

    def __init__(self,
                 values: Mapping[tuple[str, int], RationalLike] = ()) -> None:
        self._values: dict[tuple[str, int], Fraction] = {}
        for key, value in dict(values).items():
            v = rat(value)
            if v < 0:
                raise GraphError(f"negative flow at {key}")
            if v != 0:
                self._values[key] = v

    def get(self, arc_id: str, cid: int) -> Fraction:
        return self._values.get((arc_id, cid), ZERO)

    def items(self) -> Iterator[tuple[tuple[str, int], Fraction]]:
        return iter(self._values.items())

    def to_dict(self) -> dict[tuple[str, int], Fraction]:
        return dict(self._values)

    def support(self, cid: int) -> frozenset[str]:
        return frozenset(a for (a, i), _ in self._values.items() if i == cid)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Multiflow):
            return NotImplemented
        return self._values == other._values

    def __repr__(self) -> str:
        return f"Multiflow({self._values!r})"

    @staticmethod
    def from_rows(rows: Mapping[str, Mapping[int, RationalLike]]
                  ) -> "Multiflow":
        """Build from a per-arc mapping commodity -> value."""
        values = {(aid, cid): val
                  for aid, row in rows.items() for cid, val in row.items()}
        return Multiflow(values)

    def scaled(self, factor: Fraction) -> "Multiflow":
        return Multiflow({k: v * factor for k, v in self._values.items()})

    def plus(self, other: "Multiflow") -> "Multiflow":
        out = dict(self._values)
        for k, v in other.items():
            out[k] = out.get(k, ZERO) + v
        return Multiflow(out)


@dataclass(frozen=True)
class ConservationViolation:
    node: str
    commodity: int
    imbalance: Fraction


def check_conservation(inst: Instance, X: Multiflow
                       ) -> Optional[ConservationViolation]:
    """Verify all per-commodity balance equations; None means ok."""
    g = inst.graph
    for c in inst.commodities:
        for v in g.nodes:
            balance = sum((X.get(a.id, c.id) for a in g.out_arcs(v)), ZERO) \
                - sum((X.get(a.id, c.id) for a in g.in_arcs(v)), ZERO)
            want = c.demand if v == c.source else \
                (-c.demand if v == c.sink else ZERO)
            if balance != want:
                return ConservationViolation(v, c.id, balance - want)
    return None


def total_flow(X: Multiflow,
               arcs: Optional[Iterable[str]] = None) -> dict[str, Fraction]:
    """Per-arc sums over commodities; zero entries kept when arcs given."""
    totals: dict[str, Fraction] = {}
    if arcs is not None:
        totals = {aid: ZERO for aid in arcs}
    for (aid, _cid), v in X.items():
        if arcs is not None and aid not in totals:
            continue
        totals[aid] = totals.get(aid, ZERO) + v
    return totals


@dataclass(frozen=True)
class DemandShareVector:
    node: int
    z: Mapping[int, Fraction]

    def fractional(self) -> frozenset[int]:
        return frozenset(i for i, v in self.z.items() if 0 < v < 1)

    def fully_routed(self) -> frozenset[int]:
        return frozenset(i for i, v in self.z.items() if v == 1)


def demand_shares(inst: Instance, X: Multiflow, nid: int
                  ) -> DemandShareVector:
    """Fraction of each demand routed through the component at nid.

    A commodity with an endpoint strictly inside the component counts as
    fully routed; otherwise the share is the commodity's flow across the
    component's start terminal, divided by its demand.
    """
    tree = inst.tree
    node = tree.node(nid)
    inner = tree.inner_nodes(nid)
    arcs = tree.arc_set(nid)
    g = inst.graph
    boundary = [a for a in g.out_arcs(node.u) if a.id in arcs]
    z: dict[int, Fraction] = {}
    for c in inst.commodities:
        if c.source in inner or c.sink in inner:
            z[c.id] = ONE
        else:
            z[c.id] = sum((X.get(a.id, c.id) for a in boundary),
                          ZERO) / c.demand
    return DemandShareVector(nid, z)


def all_demand_shares(inst: Instance, X: Multiflow
                      ) -> dict[int, DemandShareVector]:
    return {nid: demand_shares(inst, X, nid) for nid in inst.tree.preorder()}


def check_share_recurrences(inst: Instance, X: Multiflow) -> Optional[int]:
    """Verify the parent/child share identities; returns a bad node id."""
    tree = inst.tree
    shares = all_demand_shares(inst, X)
    for nid in tree.preorder():
        node = tree.node(nid)
        if node.kind == 'Q':
            continue
        c1, c2 = node.children
        z, z1, z2 = shares[nid].z, shares[c1].z, shares[c2].z
        inner = tree.inner_nodes(nid)
        for c in inst.commodities:
            if node.kind == 'P':
                if z[c.id] != z1[c.id] + z2[c.id]:
                    return nid
            elif c.source in inner or c.sink in inner:
                if z[c.id] != 1 or z1[c.id] not in (ZERO, ONE) \
                        or z2[c.id] not in (ZERO, ONE):
                    return nid
            elif not (z[c.id] == z1[c.id] == z2[c.id]):
                return nid
    return None
