"""Exact rational scalars, directed multigraphs and series-parallel trees.

The decomposition tree of a series-parallel digraph is a rooted binary
tree whose leaves stand for single arcs (Q-nodes) and whose internal
nodes record series (S) or parallel (P) compositions.  Every tree node
carries the terminal pair (u, v) of the subgraph it represents.
Recognition works by exhaustive reduction: merge parallel arcs, contract
inner nodes of in- and out-degree one, and keep the composition history.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

# The universal scalar.  fractions.Fraction keeps lowest terms with a
# positive denominator and its arithmetic is exact, which is all the
# strict inequalities downstream need.
Rational = Fraction

RationalLike = Union[Fraction, int, str]


def rat(value: RationalLike) -> Fraction:
    """Coerce an int, string like "3/4", or Fraction to a Fraction."""
    if isinstance(value, Fraction):
        return value
    return Fraction(value)


def positive_part(z: Fraction) -> Fraction:
    """Return z if z > 0 and 0 otherwise."""
    return z if z > 0 else Fraction(0)


def second_max(values: Sequence[Fraction]) -> Fraction:
    """Return the second largest element (ties allowed) of a sequence.

    With at least two entries, this is the next-to-last element of the
    non-decreasing sorted order; it equals the maximum when the top two
    entries are tied.
    """
    if len(values) < 2:
        raise ValueError("second_max needs at least two values")
    return sorted(values)[-2]


@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Digraph:
    """Directed multigraph with optional rational arc capacities.

    Capacity None on an arc means the arc is uncapacitated; absent
    capacity mapping means the whole graph is uncapacitated.
    """

    nodes: tuple[str, ...]
    arcs: tuple[Arc, ...]
    capacities: Optional[Mapping[str, Optional[Fraction]]] = None

    def __post_init__(self) -> None:
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise GraphError("duplicate node ids")
        seen = set()
        for a in self.arcs:
            if a.id in seen:
                raise GraphError(f"duplicate arc id {a.id!r}")
            seen.add(a.id)
            if a.tail == a.head:
                raise GraphError(f"self-loop on arc {a.id!r}")
            if a.tail not in node_set or a.head not in node_set:
                raise GraphError(f"arc {a.id!r} has unknown endpoint")
        if self.capacities is not None:
            for aid, cap in self.capacities.items():
                if aid not in seen:
                    raise GraphError(f"capacity for unknown arc {aid!r}")
                if cap is not None and cap < 0:
                    raise GraphError(f"negative capacity on arc {aid!r}")

    @staticmethod
    def build(nodes: Iterable[str],
              arcs: Iterable[tuple[str, str, str]],
              capacities: Optional[Mapping[str, Optional[RationalLike]]] = None,
              ) -> "Digraph":
        caps = None
        if capacities is not None:
            caps = {aid: (None if c is None else rat(c))
                    for aid, c in capacities.items()}
        return Digraph(tuple(nodes),
                       tuple(Arc(i, t, h) for i, t, h in arcs),
                       caps)

    def arc(self, arc_id: str) -> Arc:
        for a in self.arcs:
            if a.id == arc_id:
                return a
        raise GraphError(f"unknown arc {arc_id!r}")

    def out_arcs(self, v: str) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.tail == v)

    def in_arcs(self, v: str) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.head == v)

    def capacity(self, arc_id: str) -> Optional[Fraction]:
        if self.capacities is None:
            return None
        return self.capacities.get(arc_id)

    def arc_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.arcs)


@dataclass(frozen=True)
class SpTreeNode:
    id: int
    kind: str                      # 'P', 'S' or 'Q'
    u: str
    v: str
    children: tuple[int, ...] = ()
    arc_id: Optional[str] = None   # set exactly for Q-nodes


class NotSeriesParallelError(Exception):
    """Raised when reduction gets stuck; carries the irreducible kernel."""

    def __init__(self, kernel: Digraph, message: str = "") -> None:
        super().__init__(message or "graph is not series-parallel "
                         "between the given terminals")
        self.kernel = kernel


@dataclass
class SpTree:
    nodes: dict[int, SpTreeNode]
    root: int
    _arcs_below: dict[int, frozenset[str]] = field(default_factory=dict,
                                                   repr=False)
    _vertices_below: dict[int, frozenset[str]] = field(default_factory=dict,
                                                       repr=False)
    _depth: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        for nid in self.postorder():
            node = self.nodes[nid]
            if node.kind == 'Q':
                self._arcs_below[nid] = frozenset([node.arc_id])
                self._vertices_below[nid] = frozenset([node.u, node.v])
            else:
                c1, c2 = node.children
                self._arcs_below[nid] = (self._arcs_below[c1]
                                         | self._arcs_below[c2])
                self._vertices_below[nid] = (self._vertices_below[c1]
                                             | self._vertices_below[c2])
        self._depth[self.root] = 0
        for nid in self.preorder():
            for c in self.nodes[nid].children:
                self._depth[c] = self._depth[nid] + 1

    def node(self, nid: int) -> SpTreeNode:
        return self.nodes[nid]

    def is_leaf(self, nid: int) -> bool:
        return self.nodes[nid].kind == 'Q'

    def children(self, nid: int) -> tuple[int, ...]:
        return self.nodes[nid].children

    def label(self, nid: int) -> tuple[str, str]:
        node = self.nodes[nid]
        return (node.u, node.v)

    def arc_set(self, nid: int) -> frozenset[str]:
        if nid not in self._arcs_below:
            raise KeyError(f"unknown tree node {nid}")
        return self._arcs_below[nid]

    def vertex_set(self, nid: int) -> frozenset[str]:
        return self._vertices_below[nid]

    def inner_nodes(self, nid: int) -> frozenset[str]:
        node = self.nodes[nid]
        return self._vertices_below[nid] - {node.u, node.v}

    def depth(self, nid: int) -> int:
        return self._depth[nid]

    def preorder(self) -> list[int]:
        order, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            order.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return order

    def postorder(self) -> list[int]:
        order: list[int] = []

        def walk(nid: int) -> None:
            for c in self.nodes[nid].children:
                walk(c)
            order.append(nid)

        walk(self.root)
        return order

    def leaf_of_arc(self, arc_id: str) -> int:
        for nid, node in self.nodes.items():
            if node.kind == 'Q' and node.arc_id == arc_id:
                return nid
        raise KeyError(f"no leaf for arc {arc_id!r}")

    def node_with_arcs(self, arc_ids: Iterable[str]) -> int:
        """Find the tree node whose arc set equals the given set."""
        target = frozenset(arc_ids)
        for nid in self.preorder():
            if self._arcs_below[nid] == target:
                return nid
        raise KeyError(f"no tree node with arc set {sorted(target)}")


def sp_arcs(tree: SpTree, nid: int) -> frozenset[str]:
    """Arc set of the subgraph represented by a tree node."""
    return tree.arc_set(nid)


# Recognition.  Components are in-progress subtrees represented as
# nested tuples ('Q', arc_id, u, v) or (kind, child1, child2, u, v);
# numeric ids are assigned by preorder once the tree is complete.

class _Comp:
    __slots__ = ("u", "v", "tree", "min_arc")

    def __init__(self, u: str, v: str, tree: tuple, min_arc: str) -> None:
        self.u = u
        self.v = v
        self.tree = tree
        self.min_arc = min_arc


def _fold_parallel(comps: list[_Comp]) -> _Comp:
    # Right fold so that, read left to right, children carry increasing
    # minimum arc ids: P(c1, P(c2, ... )).
    comps = sorted(comps, key=lambda c: c.min_arc)
    result = comps[-1]
    for comp in reversed(comps[:-1]):
        result = _Comp(comp.u, comp.v,
                       ('P', comp.tree, result.tree, comp.u, comp.v),
                       min(comp.min_arc, result.min_arc))
    return result


def recognize_sp(g: Digraph, u0: str, v0: str) -> SpTree:
    """Build the decomposition tree of g between terminals u0 and v0.

    Raises NotSeriesParallelError (carrying the irreducible kernel
    graph) when the reductions get stuck.
    """
    if u0 == v0:
        raise GraphError("terminals must be distinct")
    if not g.arcs:
        raise GraphError("empty graph")
    comps = [_Comp(a.tail, a.head, ('Q', a.id, a.tail, a.head), a.id)
             for a in g.arcs]

    while len(comps) > 1:
        # Parallel reductions first: merge every parallel class at once.
        groups: dict[tuple[str, str], list[_Comp]] = {}
        for comp in comps:
            groups.setdefault((comp.u, comp.v), []).append(comp)
        if any(len(members) > 1 for members in groups.values()):
            comps = [(_fold_parallel(members) if len(members) > 1
                      else members[0])
                     for _, members in sorted(groups.items())]
            continue
        # Series reduction: contract one eligible inner node.
        degree: dict[str, list[list[_Comp]]] = {}
        for comp in comps:
            degree.setdefault(comp.v, [[], []])[0].append(comp)
            degree.setdefault(comp.u, [[], []])[1].append(comp)
        candidates = sorted(
            w for w, (ins, outs) in degree.items()
            if w not in (u0, v0) and len(ins) == 1 and len(outs) == 1
            and ins[0].u != outs[0].v)
        if not candidates:
            break
        w = candidates[0]
        cin, cout = degree[w][0][0], degree[w][1][0]
        merged = _Comp(cin.u, cout.v,
                       ('S', cin.tree, cout.tree, cin.u, cout.v),
                       min(cin.min_arc, cout.min_arc))
        comps = [c for c in comps if c is not cin and c is not cout]
        comps.append(merged)

    if len(comps) != 1 or (comps[0].u, comps[0].v) != (u0, v0):
        kernel_nodes = sorted({c.u for c in comps} | {c.v for c in comps}
                              | {u0, v0})
        kernel = Digraph.build(kernel_nodes,
                               [(c.min_arc, c.u, c.v) for c in comps])
        raise NotSeriesParallelError(kernel)

    nodes: dict[int, SpTreeNode] = {}

    def assign(tree: tuple) -> int:
        nid = len(nodes)
        nodes[nid] = SpTreeNode(nid, 'Q', '', '')  # placeholder
        if tree[0] == 'Q':
            _, arc_id, u, v = tree
            nodes[nid] = SpTreeNode(nid, 'Q', u, v, (), arc_id)
        else:
            kind, left, right, u, v = tree
            c1 = assign(left)
            c2 = assign(right)
            nodes[nid] = SpTreeNode(nid, kind, u, v, (c1, c2))
        return nid

    root = assign(comps[0].tree)
    return SpTree(nodes, root)
