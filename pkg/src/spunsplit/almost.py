"""Swap-based transformation into an almost unsplittable multiflow.

A multiflow is almost unsplittable when every tree node has at most two
fractionally routed commodities and the children of every P-node share
at most one.  Any conserving multiflow can be brought into this form by
repeatedly exchanging equal amounts of two commodities between the two
sides of a parallel composition, which never changes per-arc totals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .core import GraphError
from .instance import Instance, Multiflow, ZERO, demand_shares


class SwapError(GraphError):
    pass


@dataclass(frozen=True)
class AlmostUnsplittableFlow:
    flow: Multiflow
    fractional: Mapping[int, tuple[int, ...]]   # tree node -> sorted I set
    split: Mapping[int, Optional[int]]          # P-node -> shared commodity


def _share(inst: Instance, values: dict[tuple[str, int], Fraction],
           nid: int, cid: int) -> Fraction:
    return demand_shares(inst, Multiflow(values), nid).z[cid]


def flow_carrying_path(inst: Instance, X: Multiflow, cid: int,
                       nid: int) -> list[str]:
    """A start-to-end path of the component on which cid flows.

    Depth-first search over arcs with positive flow, trying smaller arc
    ids first.
    """
    tree = inst.tree
    arcs = tree.arc_set(nid)
    u, v = tree.label(nid)
    c = inst.commodity(cid)
    if c.source in tree.inner_nodes(nid) or c.sink in tree.inner_nodes(nid):
        raise SwapError(f"commodity {cid} has an endpoint inside node {nid}")
    stack: list[tuple[str, list[str]]] = [(u, [])]
    seen = set()
    while stack:
        at, path = stack.pop()
        if at == v:
            return path
        if at in seen:
            continue
        seen.add(at)
        candidates = [a for a in inst.graph.out_arcs(at)
                      if a.id in arcs and X.get(a.id, cid) > 0]
        for a in sorted(candidates, key=lambda a: a.id, reverse=True):
            stack.append((a.head, path + [a.id]))
    raise SwapError(
        f"no flow-carrying path for commodity {cid} at node {nid}")


def _swap_in_place(inst: Instance, values: dict[tuple[str, int], Fraction],
                   pnode: int, i1: int, i2: int) -> None:
    """Exchange commodity i1 out of child 1 against i2 out of child 2.

    Repeats until one of them no longer uses its side.  Per-arc totals
    are untouched: on each path one commodity loses what the other
    gains.
    """
    tree = inst.tree
    c1, c2 = tree.children(pnode)
    guard = 4 * len(tree.arc_set(pnode)) + 4
    for _ in range(guard):
        if _share(inst, values, c1, i1) == 0 \
                or _share(inst, values, c2, i2) == 0:
            return
        X = Multiflow(values)
        p1 = flow_carrying_path(inst, X, i1, c1)
        p2 = flow_carrying_path(inst, X, i2, c2)
        delta = min([values[(aid, i1)] for aid in p1]
                    + [values[(aid, i2)] for aid in p2])
        for aid in p1:
            values[(aid, i1)] -= delta
            values[(aid, i2)] = values.get((aid, i2), ZERO) + delta
        for aid in p2:
            values[(aid, i2)] -= delta
            values[(aid, i1)] = values.get((aid, i1), ZERO) + delta
        for key in [k for k, v in values.items() if v == 0]:
            del values[key]
    raise AssertionError("swap did not terminate within its bound")


def swap(inst: Instance, X: Multiflow, pnode: int,
         i1: int, i2: int) -> Multiflow:
    """Functional wrapper around the exchange at a P-node."""
    tree = inst.tree
    if tree.node(pnode).kind != 'P':
        raise SwapError(f"node {pnode} is not a parallel composition")
    if i1 == i2:
        raise SwapError("need two distinct commodities")
    c1, c2 = tree.children(pnode)
    z1 = demand_shares(inst, X, c1).z[i1]
    z2 = demand_shares(inst, X, c2).z[i2]
    if not 0 < z1 < 1:
        raise SwapError(f"commodity {i1} not fractional in child {c1}")
    if not 0 < z2 < 1:
        raise SwapError(f"commodity {i2} not fractional in child {c2}")
    values = X.to_dict()
    _swap_in_place(inst, values, pnode, i1, i2)
    return Multiflow(values)


def reduce_shared_fractional(inst: Instance, X: Multiflow,
                             pnode: int) -> Multiflow:
    """Swap shared fractional pairs until the children share at most one."""
    values = X.to_dict()
    _reduce_shared_in_place(inst, values, pnode)
    return Multiflow(values)


def _reduce_shared_in_place(inst: Instance,
                            values: dict[tuple[str, int], Fraction],
                            pnode: int) -> None:
    tree = inst.tree
    c1, c2 = tree.children(pnode)
    guard = len(inst.commodities) ** 2 + 4
    for _ in range(guard):
        X = Multiflow(values)
        shared = sorted(demand_shares(inst, X, c1).fractional()
                        & demand_shares(inst, X, c2).fractional())
        if len(shared) <= 1:
            return
        _swap_in_place(inst, values, pnode, shared[0], shared[1])
    raise AssertionError("shared-commodity reduction did not terminate")


def make_almost_unsplittable(inst: Instance,
                             X: Multiflow) -> AlmostUnsplittableFlow:
    """Top-down sweep establishing the almost unsplittable property.

    Swaps at a parallel node leave all demand shares at that node and
    above untouched, so fixing nodes from the root downwards never
    invalidates earlier work.
    """
    tree = inst.tree
    values = X.to_dict()
    for nid in tree.preorder():
        if tree.node(nid).kind != 'P':
            continue
        _reduce_shared_in_place(inst, values, nid)
        c1, c2 = tree.children(nid)
        f_here = demand_shares(inst, Multiflow(values), nid).fractional()
        f1 = demand_shares(inst, Multiflow(values), c1).fractional()
        f2 = demand_shares(inst, Multiflow(values), c2).fractional()
        extra = (f1 & f2) - f_here
        if extra and (len(f1) > 2 or len(f2) > 2):
            i1 = min(extra)
            big_is_first = len(f1) > 2
            big = f1 if big_is_first else f2
            i2 = min(big & f_here)
            if big_is_first:
                # The oversized child plays the second role in the
                # exchange; mirror the commodity arguments accordingly.
                _swap_in_place(inst, values, nid, i2, i1)
            else:
                _swap_in_place(inst, values, nid, i1, i2)

    flow = Multiflow(values)
    fractional: dict[int, tuple[int, ...]] = {}
    split: dict[int, Optional[int]] = {}
    for nid in tree.preorder():
        f = demand_shares(inst, flow, nid).fractional()
        if len(f) > 2:
            raise AssertionError(
                f"node {nid} still has {len(f)} fractional commodities")
        fractional[nid] = tuple(sorted(f))
        if tree.node(nid).kind == 'P':
            c1, c2 = tree.children(nid)
            shared = demand_shares(inst, flow, c1).fractional() \
                & demand_shares(inst, flow, c2).fractional()
            if len(shared) > 1:
                raise AssertionError(
                    f"children of {nid} share {len(shared)} commodities")
            split[nid] = min(shared) if shared else None
    return AlmostUnsplittableFlow(flow, fractional, split)
