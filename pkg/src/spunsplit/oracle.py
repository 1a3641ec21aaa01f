"""Brute-force references for desk-scale cross-validation."""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from .core import Digraph, GraphError
from .instance import Instance, Multiflow, ZERO, total_flow

DEFAULT_PATH_CAP = 10_000
DEFAULT_ROUTING_CAP = 1_000_000

ENUM_CAP_ENV = "SPUNSPLIT_ENUM_CAP"


def routing_cap() -> int:
    value = os.environ.get(ENUM_CAP_ENV)
    return int(value) if value else DEFAULT_ROUTING_CAP


class OracleCapError(GraphError):
    pass


def enumerate_paths(g: Digraph, s: str, t: str,
                    cap: int = DEFAULT_PATH_CAP,
                    allowed: Optional[frozenset[str]] = None
                    ) -> list[tuple[str, ...]]:
    """All simple s-t paths as arc-id tuples, lexicographic by arc ids."""
    if cap <= 0:
        raise GraphError("path cap must be positive")
    out: list[tuple[str, ...]] = []

    def walk(at: str, path: list[str], seen: set[str]) -> None:
        if at == t:
            out.append(tuple(path))
            if len(out) > cap:
                raise OracleCapError(f"more than {cap} paths")
            return
        for a in sorted(g.out_arcs(at), key=lambda a: a.id):
            if a.head in seen:
                continue
            if allowed is not None and a.id not in allowed:
                continue
            seen.add(a.head)
            path.append(a.id)
            walk(a.head, path, seen)
            path.pop()
            seen.remove(a.head)

    walk(s, [], {s})
    return out


def _routings(inst: Instance, cap: int,
              allowed: Optional[dict[int, frozenset[str]]] = None
              ) -> Iterator[dict[int, tuple[str, ...]]]:
    per_commodity = []
    size = 1
    for c in inst.commodities:
        paths = enumerate_paths(inst.graph, c.source, c.sink,
                                allowed=None if allowed is None
                                else allowed[c.id])
        per_commodity.append((c.id, paths))
        size *= max(len(paths), 1)
        if size > cap:
            raise OracleCapError(
                f"routing product of {size} exceeds the cap {cap}")
    ids = [cid for cid, _ in per_commodity]
    for combo in itertools.product(*(paths for _, paths in per_commodity)):
        yield dict(zip(ids, combo))


def exhaustive_feasibility(inst: Instance,
                           cap: Optional[int] = None
                           ) -> Optional[Multiflow]:
    """First unsplittable routing fitting the capacities, if any."""
    if cap is None:
        cap = routing_cap()
    for routing in _routings(inst, cap):
        load: dict[str, Fraction] = {}
        for cid, path in routing.items():
            d = inst.demand(cid)
            for aid in path:
                load[aid] = load.get(aid, ZERO) + d
        ok = all(inst.graph.capacity(aid) is None
                 or load[aid] <= inst.graph.capacity(aid)
                 for aid in load)
        if ok:
            return Multiflow({(aid, cid): inst.demand(cid)
                              for cid, path in routing.items()
                              for aid in path})
    return None


@dataclass(frozen=True)
class ImpossibilityCertificate:
    """Witness that no integer multiflow matches the matrix constraints.

    forced: arcs whose total flow is integral and therefore pinned;
    tried: how many support-respecting routings were ruled out.
    """

    forced: tuple[str, ...]
    tried: int


def matrix_decomposability_probe(inst: Instance, X: Multiflow,
                                 cap: Optional[int] = None
                                 ) -> Optional[ImpossibilityCertificate]:
    """Search for an integer multiflow within X's support and rounding
    bounds of its totals; None means the search is inconclusive.

    Any convex combination of integer multiflows equal to X would need
    members supported inside X's support whose totals stay within the
    floor/ceiling of X's totals; if no such member exists the matrix is
    not decomposable, however the totals may still be.
    """
    if cap is None:
        cap = routing_cap()
    for c in inst.commodities:
        if c.demand.denominator != 1:
            raise GraphError("probe needs integral demands")
    totals = total_flow(X, (a.id for a in inst.graph.arcs))
    support = {c.id: X.support(c.id) for c in inst.commodities}
    tried = 0
    for routing in _routings(inst, cap, allowed=support):
        tried += 1
        load: dict[str, Fraction] = {aid: ZERO for aid in totals}
        for cid, path in routing.items():
            d = inst.demand(cid)
            for aid in path:
                load[aid] += d
        if all(math.floor(totals[aid]) <= load[aid] <= math.ceil(totals[aid])
               for aid in totals):
            return None
    forced = tuple(sorted(aid for aid, v in totals.items()
                          if v.denominator == 1
                          and any(0 < X.get(aid, c.id) < c.demand
                                  for c in inst.commodities)))
    return ImpossibilityCertificate(forced, tried)
