"""Alignment, node splitting, transshipment solving and integrality.

Pooling all commodities of an aligned instance into a single-commodity
transshipment is lossless: the per-node excess b sums supplies and
demands, a feasible transshipment can be peeled back into a multiflow
component by component, and for integral excesses the transshipment
polytope has integral extreme points reachable by cycle rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .core import Arc, Digraph, GraphError, SpTree, recognize_sp
from .instance import Commodity, Instance, Multiflow, ZERO, _reachable, \
    total_flow


class AlignmentError(GraphError):
    pass


@dataclass(frozen=True)
class NodeSplit:
    node: str
    v_in: str
    v_out: str
    arc_id: str


@dataclass(frozen=True)
class AlignmentMap:
    """How an instance was rewritten into an aligned one."""

    chains: Mapping[int, tuple[int, ...]]   # original id -> subcommodity ids
    splits: tuple[NodeSplit, ...]

    def split_arc_ids(self) -> frozenset[str]:
        return frozenset(s.arc_id for s in self.splits)

    def original_node(self, node: str) -> str:
        # Splits may stack when a split half gets split again.
        changed = True
        while changed:
            changed = False
            for s in self.splits:
                if node in (s.v_in, s.v_out):
                    node = s.node
                    changed = True
                    break
        return node


@dataclass(frozen=True)
class Transshipment:
    b: Mapping[str, Fraction]
    flow: Optional[Mapping[str, Fraction]] = None


@dataclass(frozen=True)
class InfeasibleCut:
    """Node set whose outgoing capacity cannot carry the required excess."""

    nodes: frozenset[str]


def _mandatory_nodes(g: Digraph, source: str, sink: str) -> list[str]:
    out = []
    for v in g.nodes:
        if v in (source, sink):
            continue
        arcs_at_v = frozenset(a.id for a in g.out_arcs(v)) \
            | frozenset(a.id for a in g.in_arcs(v))
        if sink not in _reachable(g, source, arcs_at_v):
            out.append(v)
    return sorted(out)


def is_aligned(inst: Instance, c: Commodity) -> bool:
    tree = inst.tree
    return any(tree.label(nid) == (c.source, c.sink)
               for nid in tree.nodes)


def find_mandatory_node(inst: Instance, cid: int) -> Optional[str]:
    """A node other than the endpoints lying on every source-sink path.

    For commodities whose endpoints match no tree-node label the node is
    located by walking the tree: take the shallowest node whose start
    terminal is the source; its end terminal works when the sink lies
    outside the component, and otherwise the start terminal of the
    shallowest node ending at the sink does.  Ties break by smallest
    tree-node id, and the result is cross-checked by a removal test.
    """
    c = inst.commodity(cid)
    tree = inst.tree
    mandatory = _mandatory_nodes(inst.graph, c.source, c.sink)
    if is_aligned(inst, c):
        return mandatory[0] if mandatory else None
    by_depth = sorted(tree.nodes, key=lambda n: (tree.depth(n), n))
    omega = next(n for n in by_depth if tree.node(n).u == c.source)
    if c.sink not in tree.vertex_set(omega):
        v = tree.node(omega).v
    elif c.sink in tree.inner_nodes(omega):
        omega2 = next(n for n in by_depth if tree.node(n).v == c.sink)
        v = tree.node(omega2).u
    else:
        raise AlignmentError(
            f"commodity {cid} reported unaligned but matches {omega}")
    if v not in mandatory:
        raise AssertionError(
            f"tree walk returned {v!r}, not mandatory for commodity {cid}")
    return v


def align_instance(inst: Instance) -> tuple[Instance, AlignmentMap]:
    """Subdivide commodities at mandatory nodes and split shared nodes.

    Afterwards every commodity's endpoint pair labels some tree node and
    no node is simultaneously a source and a sink; coincident nodes are
    pulled apart by an uncapacitated arc.  Splitting a node can reshape
    the canonical tree and unalign another commodity, so subdivision and
    splitting alternate until both conditions hold at once.
    """
    work = list(inst.commodities)
    chains: dict[int, list[int]] = {c.id: [c.id] for c in inst.commodities}
    next_id = max(c.id for c in work) + 1
    current = inst
    splits: list[NodeSplit] = []

    outer_cap = 4 * len(inst.graph.nodes) + 8
    for _ in range(outer_cap):
        changed = True
        rounds = 0
        while changed:
            rounds += 1
            if rounds > len(current.graph.nodes) * len(work) + 10:
                raise AssertionError(
                    "subdivision failed to reach a fixed point")
            changed = False
            for c in sorted(work, key=lambda c: c.id):
                if is_aligned(current, c):
                    continue
                v = find_mandatory_node(current, c.id)
                if v is None:
                    raise AssertionError(
                        f"unaligned commodity {c.id} has no mandatory node")
                first = Commodity(c.id, c.source, v, c.demand)
                second = Commodity(next_id, v, c.sink, c.demand)
                next_id += 1
                work[work.index(c)] = first
                work.append(second)
                for orig, chain in chains.items():
                    if c.id in chain:
                        chain.insert(chain.index(c.id) + 1, second.id)
                        break
                current = Instance(current.graph, current.source,
                                   current.sink, tuple(work), current.tree)
                changed = True
                break

        shared = sorted({c.source for c in work} & {c.sink for c in work})
        if not shared:
            break

        graph = current.graph
        nodes = list(graph.nodes)
        arcs = [(a.id, a.tail, a.head) for a in graph.arcs]
        caps = dict(graph.capacities) \
            if graph.capacities is not None else None
        src, snk = current.source, current.sink
        for v in shared:
            v_in, v_out = f"{v}#in", f"{v}#out"
            split_arc = f"split:{v}"
            nodes[nodes.index(v)] = v_in
            nodes.insert(nodes.index(v_in) + 1, v_out)
            arcs = [(aid, tail if tail != v else v_out,
                     head if head != v else v_in)
                    for aid, tail, head in arcs]
            arcs.append((split_arc, v_in, v_out))
            if caps is not None:
                caps[split_arc] = None
            work = [Commodity(c.id,
                              c.source if c.source != v else v_out,
                              c.sink if c.sink != v else v_in,
                              c.demand) for c in work]
            if src == v:
                src = v_out
            if snk == v:
                snk = v_in
            splits.append(NodeSplit(v, v_in, v_out, split_arc))
        current = Instance.build(Digraph.build(nodes, arcs, caps),
                                 src, snk, work)
    else:
        raise AssertionError("alignment did not stabilize")

    for c in current.commodities:
        if not is_aligned(current, c):
            raise AssertionError(
                f"commodity {c.id} still unaligned after splitting")
    amap = AlignmentMap({k: tuple(v) for k, v in chains.items()},
                        tuple(splits))
    return current, amap


def map_flow_back(orig: Instance, amap: AlignmentMap,
                  X_aligned: Multiflow) -> Multiflow:
    """Collapse subcommodity chains and split arcs back to the original."""
    orig_arcs = frozenset(a.id for a in orig.graph.arcs)
    values: dict[tuple[str, int], Fraction] = {}
    member_of = {sub: oid for oid, chain in amap.chains.items()
                 for sub in chain}
    for (aid, cid), v in X_aligned.items():
        if aid not in orig_arcs:
            continue
        key = (aid, member_of[cid])
        values[key] = values.get(key, ZERO) + v
    return Multiflow(values)


def to_transshipment(inst: Instance) -> Transshipment:
    """Per-node excess obtained by pooling all commodities."""
    b = {v: ZERO for v in inst.graph.nodes}
    for c in inst.commodities:
        b[c.source] += c.demand
        b[c.sink] -= c.demand
    return Transshipment(b)


class _MaxFlow:
    """Integer max flow by shortest augmenting paths."""

    def __init__(self, nodes: Iterable[str]) -> None:
        self.index = {v: i for i, v in enumerate(nodes)}
        self.adj: list[list[int]] = [[] for _ in self.index]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add(self, tail: str, head: str, cap: int) -> int:
        eid = len(self.to)
        self.adj[self.index[tail]].append(eid)
        self.to.append(self.index[head])
        self.cap.append(cap)
        self.adj[self.index[head]].append(eid + 1)
        self.to.append(self.index[tail])
        self.cap.append(0)
        return eid

    def run(self, s: str, t: str) -> int:
        source, sink = self.index[s], self.index[t]
        flow = 0
        while True:
            parent_edge = [-1] * len(self.adj)
            parent_edge[source] = -2
            queue = [source]
            while queue and parent_edge[sink] == -1:
                nxt = []
                for v in queue:
                    for eid in self.adj[v]:
                        w = self.to[eid]
                        if self.cap[eid] > 0 and parent_edge[w] == -1:
                            parent_edge[w] = eid
                            nxt.append(w)
                queue = nxt
            if parent_edge[sink] == -1:
                return flow
            bottleneck = None
            v = sink
            while v != source:
                eid = parent_edge[v]
                bottleneck = self.cap[eid] if bottleneck is None \
                    else min(bottleneck, self.cap[eid])
                v = self.to[eid ^ 1]
            v = sink
            while v != source:
                eid = parent_edge[v]
                self.cap[eid] -= bottleneck
                self.cap[eid ^ 1] += bottleneck
                v = self.to[eid ^ 1]
            flow += bottleneck

    def residual_reachable(self, s: str) -> frozenset[str]:
        seen = {self.index[s]}
        stack = [self.index[s]]
        while stack:
            v = stack.pop()
            for eid in self.adj[v]:
                w = self.to[eid]
                if self.cap[eid] > 0 and w not in seen:
                    seen.add(w)
                    stack.append(w)
        names = {i: v for v, i in self.index.items()}
        return frozenset(names[i] for i in seen)


def solve_transshipment(g: Digraph, b: Mapping[str, Fraction],
                        capacities: Optional[Mapping[str, Optional[Fraction]]]
                        = None,
                        ) -> Union[dict[str, Fraction], InfeasibleCut]:
    """Exact feasible flow meeting the excesses, or a violated cut.

    All rationals are scaled to a common denominator and the problem is
    solved as an integer max flow from a super-source to a super-sink.
    """
    if capacities is None:
        capacities = g.capacities if g.capacities is not None else {}
    total = sum(b.values())
    if total != 0:
        raise GraphError("excesses must sum to zero")
    denoms = [v.denominator for v in b.values()] + \
        [c.denominator for c in capacities.values() if c is not None]
    scale = math.lcm(*denoms) if denoms else 1
    supply = sum(int(v * scale) for v in b.values() if v > 0)

    net = _MaxFlow(list(g.nodes) + ["#s", "#t"])
    arc_edge: dict[str, int] = {}
    for a in g.arcs:
        cap = capacities.get(a.id)
        cap_int = supply if cap is None else int(cap * scale)
        arc_edge[a.id] = net.add(a.tail, a.head, cap_int)
    for v, excess in b.items():
        if excess > 0:
            net.add("#s", v, int(excess * scale))
        elif excess < 0:
            net.add(v, "#t", int(-excess * scale))
    pushed = net.run("#s", "#t")
    if pushed < supply:
        witness = net.residual_reachable("#s") - {"#s"}
        return InfeasibleCut(frozenset(witness))
    flow = {}
    for aid, eid in arc_edge.items():
        used = net.cap[eid ^ 1]
        if used:
            flow[aid] = Fraction(used, scale)
    return flow


def _peel_flow(g: Digraph, arc_ids: frozenset[str],
               y: dict[str, Fraction], u: str, v: str,
               amount: Fraction) -> dict[str, Fraction]:
    """Extract a u-v flow of the given value beneath y within arc_ids."""
    residual = {aid: y.get(aid, ZERO) for aid in arc_ids}
    flow = {aid: ZERO for aid in arc_ids}
    remaining = amount
    while remaining > 0:
        # BFS over arcs with positive residual, smallest arc id first.
        parent: dict[str, str] = {u: ""}
        queue = [u]
        while queue and v not in parent:
            nxt = []
            for w in queue:
                for a in sorted(g.out_arcs(w), key=lambda a: a.id):
                    if a.id in residual and residual[a.id] > 0 \
                            and a.head not in parent:
                        parent[a.head] = a.id
                        nxt.append(a.head)
            queue = nxt
        if v not in parent:
            raise AlignmentError(
                f"cannot peel {amount} units of {u}->{v} flow")
        path = []
        w = v
        while w != u:
            aid = parent[w]
            path.append(aid)
            w = g.arc(aid).tail
        delta = min([remaining] + [residual[aid] for aid in path])
        for aid in path:
            residual[aid] -= delta
            flow[aid] += delta
        remaining -= delta
    return {aid: val for aid, val in flow.items() if val != 0}


def multiflow_from_transshipment(inst: Instance,
                                 y: Mapping[str, Fraction]) -> Multiflow:
    """Split a pooled transshipment back into per-commodity flows.

    Requires the instance to be aligned with no node serving as both a
    source and a sink.  Commodities are peeled deepest component first;
    each takes a start-to-end flow worth its demand from the remaining
    transshipment inside its own component.
    """
    tree = inst.tree
    sources = {c.source for c in inst.commodities}
    sinks = {c.sink for c in inst.commodities}
    if sources & sinks:
        raise AlignmentError("a node is both a source and a sink")
    by_depth = sorted(tree.nodes, key=lambda n: (tree.depth(n), n))
    home: dict[int, int] = {}
    for c in inst.commodities:
        for nid in by_depth:
            if tree.label(nid) == (c.source, c.sink):
                home[c.id] = nid
                break
        else:
            raise AlignmentError(f"commodity {c.id} is not aligned")

    residual = dict(y)
    values: dict[tuple[str, int], Fraction] = {}
    order = sorted(inst.commodities,
                   key=lambda c: (-tree.depth(home[c.id]), c.id))
    for c in order:
        nid = home[c.id]
        part = _peel_flow(inst.graph, tree.arc_set(nid), residual,
                          c.source, c.sink, c.demand)
        for aid, val in part.items():
            values[(aid, c.id)] = val
            residual[aid] = residual.get(aid, ZERO) - val
    if any(v != 0 for v in residual.values()):
        raise AssertionError("transshipment not fully consumed")
    return Multiflow(values)


def integer_decomposition(g: Digraph, b: Mapping[str, Fraction],
                          y: Mapping[str, Fraction],
                          ) -> list[tuple[Fraction, dict[str, Fraction]]]:
    """Write y as a convex combination of integer flows with the same
    excesses, each within floor/ceiling of y arc by arc.

    Fractional arcs always close an undirected cycle (integral excesses
    force even fractional degree at every node); pushing the cycle's two
    opposite circulations to the nearest integrality breakpoints splits
    the problem in two.
    """
    for v, excess in b.items():
        if excess.denominator != 1:
            raise GraphError(f"excess at {v!r} is not integral")

    base = {a.id: y.get(a.id, ZERO) for a in g.arcs}

    def frac_cycle(flow: dict[str, Fraction]
                   ) -> Optional[list[tuple[str, int]]]:
        fractional = [a for a in g.arcs if flow[a.id].denominator != 1]
        if not fractional:
            return None
        # Walk the undirected fractional-support graph until a node
        # repeats; every node there has degree at least two.
        incident: dict[str, list[tuple[Arc, int]]] = {}
        for a in fractional:
            incident.setdefault(a.tail, []).append((a, +1))
            incident.setdefault(a.head, []).append((a, -1))
        start = fractional[0].tail
        path: list[tuple[str, int]] = []
        at = start
        visited_at: dict[str, int] = {start: 0}
        used: set[str] = set()
        while True:
            a, direction = next((a, d) for a, d in incident[at]
                                if a.id not in used)
            used.add(a.id)
            path.append((a.id, direction))
            at = a.head if direction > 0 else a.tail
            if at in visited_at:
                return path[visited_at[at]:]
            visited_at[at] = len(path)

    def split(flow: dict[str, Fraction],
              weight: Fraction) -> list[tuple[Fraction, dict[str, Fraction]]]:
        cycle = frac_cycle(flow)
        if cycle is None:
            return [(weight, dict(flow))]
        up = min((math.ceil(flow[aid]) - flow[aid]) if d > 0
                 else (flow[aid] - math.floor(flow[aid]))
                 for aid, d in cycle)
        down = min((flow[aid] - math.floor(flow[aid])) if d > 0
                   else (math.ceil(flow[aid]) - flow[aid])
                   for aid, d in cycle)
        plus = dict(flow)
        minus = dict(flow)
        for aid, d in cycle:
            plus[aid] += up * d
            minus[aid] -= down * d
        out = split(plus, weight * down / (up + down))
        out.extend(split(minus, weight * up / (up + down)))
        return out

    terms = split(base, Fraction(1))
    merged: dict[tuple, tuple[Fraction, dict[str, Fraction]]] = {}
    for weight, flow in terms:
        key = tuple(sorted((aid, val) for aid, val in flow.items()))
        if key in merged:
            merged[key] = (merged[key][0] + weight, merged[key][1])
        else:
            merged[key] = (weight, flow)
    out = sorted(merged.values(),
                 key=lambda t: tuple(sorted(t[1].items())))
    for weight, flow in out:
        for a in g.arcs:
            val = flow[a.id]
            if val.denominator != 1:
                raise AssertionError("non-integral member flow")
            if not math.floor(base[a.id]) <= val <= math.ceil(base[a.id]):
                raise AssertionError("member flow outside rounding bounds")
    return out


def feasible_integer_multiflow(inst: Instance
                               ) -> Union[Multiflow, InfeasibleCut]:
    """Integer feasible multiflow for integer capacities and demands."""
    for c in inst.commodities:
        if c.demand.denominator != 1:
            raise GraphError("demands must be integral")
    if inst.graph.capacities is not None:
        for cap in inst.graph.capacities.values():
            if cap is not None and cap.denominator != 1:
                raise GraphError("capacities must be integral")
    aligned, amap = align_instance(inst)
    shipment = to_transshipment(aligned)
    solved = solve_transshipment(aligned.graph, shipment.b)
    if isinstance(solved, InfeasibleCut):
        witness = frozenset(amap.original_node(v) for v in solved.nodes)
        return InfeasibleCut(witness)
    # An integral optimum exists and the integer max flow found one.
    X_aligned = multiflow_from_transshipment(aligned, solved)
    return map_flow_back(inst, amap, X_aligned)
