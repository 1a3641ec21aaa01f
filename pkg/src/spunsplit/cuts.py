"""Cut-condition checkers with violation certificates.

Three nested conditions are supported.  The classical one compares the
capacity of each directed node cut with the demand that must cross it.
The strengthened one charges the cut with every commodity it multicuts,
and the strong one does the same for arbitrary arc sets.  All three are
decided by exhaustive enumeration, which is exact and certifying at the
instance sizes this library targets.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import GraphError
from .instance import Instance, ZERO, _reachable

DEFAULT_NODE_CAP = 22
DEFAULT_ARC_CAP = 20


class EnumerationCapError(GraphError):
    def __init__(self, what: str, size: int, cap: int) -> None:
        super().__init__(f"{what} enumeration over {size} elements "
                         f"exceeds the cap of {cap}")
        self.cap = cap


@dataclass(frozen=True)
class CutCertificate:
    kind: str                       # classical | strengthened | strong
    witness_nodes: Optional[frozenset[str]]
    witness_arcs: Optional[frozenset[str]]
    capacity: Fraction
    blocked_demand: Fraction
    blocked: frozenset[int]

    def __post_init__(self) -> None:
        if not self.capacity < self.blocked_demand:
            raise AssertionError("certificate does not certify a violation")


def blocked_commodities(inst: Instance, arc_set: frozenset[str]
                        ) -> frozenset[int]:
    """Commodities with no source-sink path once arc_set is removed."""
    out = []
    for c in inst.commodities:
        if c.sink not in _reachable(inst.graph, c.source, arc_set):
            out.append(c.id)
    return frozenset(out)


def _capacity(inst: Instance, arc_set: frozenset[str]) -> Optional[Fraction]:
    """Total capacity of an arc set; None when some arc is unbounded."""
    total = ZERO
    for aid in arc_set:
        cap = inst.graph.capacity(aid)
        if cap is None:
            return None
        total += cap
    return total


def out_cut(inst: Instance, nodes: frozenset[str]) -> frozenset[str]:
    return frozenset(a.id for a in inst.graph.arcs
                     if a.tail in nodes and a.head not in nodes)


def check_cut(inst: Instance, mode: str,
              node_cap: int = DEFAULT_NODE_CAP,
              arc_cap: int = DEFAULT_ARC_CAP) -> Optional[CutCertificate]:
    """Search for a violated cut of the requested kind.

    Returns None when the condition holds, else the first violation in
    subset enumeration order (binary counting over the sorted id list).
    """
    if mode not in ("classical", "strengthened", "strong"):
        raise GraphError(f"unknown cut mode {mode!r}")
    if inst.graph.capacities is None:
        raise GraphError("cut checking needs capacities")
    if mode == "strong":
        return _check_strong(inst, arc_cap)
    return _check_node_cuts(inst, mode, node_cap)


def _check_node_cuts(inst: Instance, mode: str,
                     node_cap: int) -> Optional[CutCertificate]:
    nodes = sorted(inst.graph.nodes)
    if len(nodes) > node_cap:
        raise EnumerationCapError("node subset", len(nodes), node_cap)
    for mask in range(1, 1 << len(nodes)):
        subset = frozenset(nodes[i] for i in range(len(nodes))
                           if mask >> i & 1)
        cut = out_cut(inst, subset)
        capacity = _capacity(inst, cut)
        if capacity is None:
            continue
        if mode == "classical":
            blocked = frozenset(c.id for c in inst.commodities
                                if c.source in subset
                                and c.sink not in subset)
        else:
            blocked = blocked_commodities(inst, cut)
        demand = sum((inst.demand(i) for i in blocked), ZERO)
        if capacity < demand:
            return CutCertificate(mode, subset, None,
                                  capacity, demand, blocked)
    return None


def _check_strong(inst: Instance, arc_cap: int) -> Optional[CutCertificate]:
    arcs = sorted(a.id for a in inst.graph.arcs)
    if len(arcs) > arc_cap:
        raise EnumerationCapError("arc subset", len(arcs), arc_cap)
    for mask in range(1, 1 << len(arcs)):
        subset = frozenset(arcs[i] for i in range(len(arcs))
                           if mask >> i & 1)
        capacity = _capacity(inst, subset)
        if capacity is None:
            continue
        blocked = blocked_commodities(inst, subset)
        demand = sum((inst.demand(i) for i in blocked), ZERO)
        if capacity < demand:
            return CutCertificate("strong", None, subset,
                                  capacity, demand, blocked)
    return None
