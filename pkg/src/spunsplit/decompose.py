"""Convex decomposition of multiflows into unsplittable routings.

The construction walks the decomposition tree bottom-up.  At a leaf the
four routing options (route neither, either, or both of the at most two
fractional commodities) get closed-form convex weights.  A series node
pairs up the two children's terms option by option; a parallel node
first distributes weight over the compatible combinations of child
options (the lambda coefficients, with special cases when the commodity
split between the children is itself fractional at the node) and then
pairs terms within each combination.  Pairing uses the two-pointer
refinement of two non-negative combinations, so the number of terms
stays linear in the tree size.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .core import GraphError, Rational, positive_part, second_max
from .almost import AlmostUnsplittableFlow, make_almost_unsplittable
from .instance import DemandShareVector, Instance, Multiflow, ZERO, ONE, \
    all_demand_shares, check_conservation, demand_shares, total_flow


# ---------------------------------------------------------------- weights

def _check_unit_range(name: str, z: Fraction,
                      exclusive_top: bool = False) -> None:
    if z < 0 or z > 1 or (exclusive_top and z == 1):
        raise GraphError(f"{name} = {z} outside the allowed range")


def mu_coefficients(z_p: Fraction, z_q: Fraction
                    ) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Convex weights of the four routing options at one node."""
    _check_unit_range("z_p", z_p, exclusive_top=True)
    _check_unit_range("z_q", z_q, exclusive_top=True)
    mu = (positive_part((1 - z_q) - z_p),
          min(z_p, 1 - z_q),
          1 - max(z_p, 1 - z_q),
          positive_part(z_p - (1 - z_q)))
    assert sum(mu) == 1 and mu[1] + mu[3] == z_p and mu[2] + mu[3] == z_q
    assert sum(1 for m in mu if m != 0) <= 3
    return mu


def lambda_coefficients(z_p: Fraction, z_r: Fraction, z_q: Fraction
                        ) -> tuple[Fraction, ...]:
    """Weights of the eight child-option combinations, general case."""
    for name, z in (("z_p", z_p), ("z_r", z_r), ("z_q", z_q)):
        _check_unit_range(name, z)
    m = second_max([z_p, z_r, 1 - z_q])
    lam = (positive_part((1 - z_q) - m),
           positive_part(m - z_p),
           positive_part(m - z_r),
           min(z_p, z_r, 1 - z_q),
           1 - max(z_p, z_r, 1 - z_q),
           positive_part(z_r - m),
           positive_part(z_p - m),
           positive_part(m - (1 - z_q)))
    assert sum(lam) == 1
    assert sum(1 for v in lam if v != 0) <= 4
    mu = mu_coefficients(z_p, z_q)
    assert mu == (lam[0] + lam[1], lam[2] + lam[3],
                  lam[4] + lam[5], lam[6] + lam[7])
    return lam


def lambda_coefficients_p_eq_r(z_p: Fraction, z_r: Fraction, z_q: Fraction
                               ) -> tuple[Fraction, ...]:
    """Weights of the six combinations when the split commodity is p.

    Here z_r is p's share in the child that also carries q; the other
    child carries the remaining z_p - z_r.
    """
    for name, z in (("z_p", z_p), ("z_r", z_r), ("z_q", z_q)):
        _check_unit_range(name, z)
    if z_r > z_p:
        raise GraphError(f"z_r = {z_r} exceeds z_p = {z_p}")
    m = second_max([z_p, z_r, 1 - z_q])
    lam = (positive_part((1 - z_q) - z_p),
           m - z_r,
           min(z_r, 1 - z_q),
           1 - max(z_p, 1 - z_q),
           z_p - m,
           positive_part(z_r - (1 - z_q)))
    assert sum(lam) == 1 and all(v >= 0 for v in lam)
    mu = mu_coefficients(z_p, z_q)
    assert mu == (lam[0], lam[1] + lam[2], lam[3], lam[4] + lam[5])
    return lam


# ------------------------------------------------------------- refinement

def refine_convex(a: Sequence[Fraction], b: Sequence[Fraction]
                  ) -> list[tuple[int, int, Fraction]]:
    """Two-pointer common refinement of two equal-total weight lists.

    Returns triples (index into a, index into b, weight); the weights
    marginalize back to both inputs and at most len(a)+len(b)-1 triples
    are produced.
    """
    if not a or not b:
        raise GraphError("refinement needs nonempty weight lists")
    if sum(a) != sum(b):
        raise GraphError("weight lists must have equal totals")
    out: list[tuple[int, int, Fraction]] = []
    i = j = 0
    ra, rb = a[0], b[0]
    while True:
        step = min(ra, rb)
        if step > 0:
            out.append((i, j, step))
        ra -= step
        rb -= step
        advance_a = ra == 0 and i < len(a) - 1
        advance_b = rb == 0 and j < len(b) - 1
        if not advance_a and not advance_b:
            break
        if advance_a:
            i += 1
            ra = a[i]
        if advance_b:
            j += 1
            rb = b[j]
    assert ra == 0 and rb == 0
    assert len(out) <= len(a) + len(b) - 1
    return out


def refine_linear(a: Sequence[Fraction], b: Sequence[Fraction],
                  rho: Fraction) -> list[tuple[int, int, Fraction]]:
    """Refine two non-negative combinations and rescale to total rho."""
    if rho <= 0:
        raise GraphError("rho must be positive")
    sa, sb = sum(a), sum(b)
    if sa <= 0 or sb <= 0:
        raise GraphError("weight lists must have positive totals")
    pairs = refine_convex([v / sa for v in a], [v / sb for v in b])
    out = [(i, j, w * rho) for i, j, w in pairs]
    assert sum(w for _, _, w in out) == rho
    return out


# ------------------------------------------------------- recursion pieces

@dataclass(frozen=True)
class _Term:
    weight: Fraction
    content: frozenset[int]                 # fractional commodities routed
    routing: Mapping[int, frozenset[str]]   # commodity -> arcs used


def _pq(zvec: DemandShareVector) -> tuple[Optional[int], Optional[int],
                                          Fraction, Fraction]:
    fractional = sorted(zvec.fractional())
    if len(fractional) > 2:
        raise GraphError("more than two fractional commodities at a node")
    p = fractional[0] if fractional else None
    q = fractional[1] if len(fractional) > 1 else None
    z_p = zvec.z[p] if p is not None else ZERO
    z_q = zvec.z[q] if q is not None else ZERO
    return p, q, z_p, z_q


def _content(*commodities: Optional[int]) -> frozenset[int]:
    return frozenset(c for c in commodities if c is not None)


def _mu_rows(zvec: DemandShareVector
             ) -> list[tuple[frozenset[int], Fraction]]:
    """Routing options of one node as (content, weight), zeros dropped."""
    p, q, z_p, z_q = _pq(zvec)
    mu = mu_coefficients(z_p, z_q)
    options = [_content(), _content(p), _content(q), _content(p, q)]
    # A positive weight on an option may only select real commodities.
    assert p is not None or (mu[1] == 0 and mu[3] == 0)
    assert q is not None or (mu[2] == 0 and mu[3] == 0)
    return [(c, w) for c, w in zip(options, mu) if w > 0]


def _by_content(terms: Sequence[_Term]
                ) -> dict[frozenset[int], list[_Term]]:
    groups: dict[frozenset[int], list[_Term]] = {}
    for t in terms:
        groups.setdefault(t.content, []).append(t)
    return groups


def _group_total(groups: Mapping[frozenset[int], list[_Term]],
                 content: frozenset[int]) -> Fraction:
    return sum((t.weight for t in groups.get(content, [])), ZERO)


def _merge_terms(terms: list[_Term]) -> list[_Term]:
    merged: dict[tuple, _Term] = {}
    for t in terms:
        key = (t.content, tuple(sorted((c, tuple(sorted(arcs)))
                                       for c, arcs in t.routing.items())))
        if key in merged:
            merged[key] = _Term(merged[key].weight + t.weight,
                                t.content, t.routing)
        else:
            merged[key] = t
    return list(merged.values())


def leaf_decomposition(inst: Instance, X: Multiflow, nid: int,
                       shares: Optional[Mapping[int, DemandShareVector]]
                       = None) -> list[_Term]:
    """Terms of a single-arc component, one per surviving option."""
    node = inst.tree.node(nid)
    if node.kind != 'Q':
        raise GraphError(f"node {nid} is not a leaf")
    zvec = shares[nid] if shares is not None \
        else demand_shares(inst, X, nid)
    full = zvec.fully_routed()
    terms = []
    for content, weight in _mu_rows(zvec):
        routing = {i: frozenset([node.arc_id])
                   for i in sorted(full | content)}
        terms.append(_Term(weight, content, routing))
    return terms


def _combine_routing(r1: Mapping[int, frozenset[str]],
                     r2: Mapping[int, frozenset[str]]
                     ) -> dict[int, frozenset[str]]:
    out = dict(r1)
    for cid, arcs in r2.items():
        out[cid] = out.get(cid, frozenset()) | arcs
    return out


def series_combine(inst: Instance, X: Multiflow, nid: int,
                   d1: Sequence[_Term], d2: Sequence[_Term],
                   shares: Optional[Mapping[int, DemandShareVector]]
                   = None) -> list[_Term]:
    """Pair the children of a series node option by option.

    Both children see exactly the shares of the node itself, so the
    per-option group weights must agree on all three.
    """
    zvec = shares[nid] if shares is not None \
        else demand_shares(inst, X, nid)
    groups1, groups2 = _by_content(d1), _by_content(d2)
    terms: list[_Term] = []
    for content, weight in _mu_rows(zvec):
        a = groups1.get(content, [])
        b = groups2.get(content, [])
        if _group_total(groups1, content) != weight \
                or _group_total(groups2, content) != weight:
            raise AssertionError(
                f"series node {nid}: group {sorted(content)} weights "
                "disagree with the node's option weight")
        for i, j, w in refine_linear([t.weight for t in a],
                                     [t.weight for t in b], weight):
            terms.append(_Term(w, content,
                               _combine_routing(a[i].routing, b[j].routing)))
    return _merge_terms(terms)


def _parallel_rows(inst: Instance, nid: int,
                   zvec: DemandShareVector,
                   zvec1: DemandShareVector,
                   zvec2: DemandShareVector
                   ) -> list[tuple[frozenset[int], frozenset[int],
                                   frozenset[int], Fraction]]:
    """Weighted combinations (parent, child-1, child-2 contents)."""
    p, q, z_p, z_q = _pq(zvec)
    f1, f2 = zvec1.fractional(), zvec2.fractional()
    shared = f1 & f2
    if len(shared) > 1:
        raise GraphError(f"children of {nid} share {len(shared)} "
                         "fractional commodities")

    if not shared:
        rows = [(c, c & f1, c & f2, w) for c, w in _mu_rows(zvec)]
        return [row for row in rows if row[3] > 0]

    r = next(iter(shared))
    if r != p and r != q:
        # r is fully routed at the node, split across the children.
        if p is not None:
            first_is_p_side = p in f1
        elif q is not None:
            first_is_p_side = q not in f1
        else:
            first_is_p_side = True
        side_q = zvec2 if first_is_p_side else zvec1
        z_r = side_q.z[r]
        lam = lambda_coefficients(z_p, z_r, z_q)
        rows = [
            (_content(), _content(r), _content(), lam[0]),
            (_content(), _content(), _content(r), lam[1]),
            (_content(p), _content(p, r), _content(), lam[2]),
            (_content(p), _content(p), _content(r), lam[3]),
            (_content(q), _content(r), _content(q), lam[4]),
            (_content(q), _content(), _content(r, q), lam[5]),
            (_content(p, q), _content(p, r), _content(q), lam[6]),
            (_content(p, q), _content(p), _content(r, q), lam[7]),
        ]
        if not first_is_p_side:
            rows = [(pc, c2, c1, w) for pc, c1, c2, w in rows]
    elif r == p:
        # p itself splits; the child also carrying q takes the q-role.
        big_is_second = q in f2 if q is not None else True
        big = zvec2 if big_is_second else zvec1
        z_r = big.z[p]
        lam = lambda_coefficients_p_eq_r(z_p, z_r, z_q)
        rows = [
            (_content(), _content(), _content(), lam[0]),
            (_content(p), _content(p), _content(), lam[1]),
            (_content(p), _content(), _content(p), lam[2]),
            (_content(q), _content(), _content(q), lam[3]),
            (_content(p, q), _content(p), _content(q), lam[4]),
            (_content(p, q), _content(), _content(p, q), lam[5]),
        ]
        if not big_is_second:
            rows = [(pc, c2, c1, w) for pc, c1, c2, w in rows]
    else:
        # q splits; mirror of the previous case under p <-> q with all
        # shares complemented, verified below against the group totals.
        big_is_first = p in f1 if p is not None else False
        big = zvec1 if big_is_first else zvec2
        z_r = big.z[q]
        lam = lambda_coefficients_p_eq_r(z_q, z_r, z_p)
        rows = [
            (_content(), _content(), _content(), lam[0]),
            (_content(q), _content(), _content(q), lam[1]),
            (_content(q), _content(q), _content(), lam[2]),
            (_content(p), _content(p), _content(), lam[3]),
            (_content(p, q), _content(p), _content(q), lam[4]),
            (_content(p, q), _content(p, q), _content(), lam[5]),
        ]
        if not big_is_first:
            rows = [(pc, c2, c1, w) for pc, c1, c2, w in rows]
    return [row for row in rows if row[3] > 0]


def parallel_combine(inst: Instance, X: Multiflow, nid: int,
                     d1: Sequence[_Term], d2: Sequence[_Term],
                     shares: Optional[Mapping[int, DemandShareVector]]
                     = None) -> list[_Term]:
    """Pair the children of a parallel node combination by combination."""
    tree = inst.tree
    c1, c2 = tree.children(nid)
    if shares is not None:
        zvec, zvec1, zvec2 = shares[nid], shares[c1], shares[c2]
    else:
        zvec = demand_shares(inst, X, nid)
        zvec1 = demand_shares(inst, X, c1)
        zvec2 = demand_shares(inst, X, c2)
    rows = _parallel_rows(inst, nid, zvec, zvec1, zvec2)

    # The row weights must marginalize to the node's option weights and
    # to both children's actual group weights.
    groups1, groups2 = _by_content(d1), _by_content(d2)
    parent_marginal: dict[frozenset[int], Fraction] = {}
    child1_marginal: dict[frozenset[int], Fraction] = {}
    child2_marginal: dict[frozenset[int], Fraction] = {}
    for pc, cc1, cc2, w in rows:
        parent_marginal[pc] = parent_marginal.get(pc, ZERO) + w
        child1_marginal[cc1] = child1_marginal.get(cc1, ZERO) + w
        child2_marginal[cc2] = child2_marginal.get(cc2, ZERO) + w
    if parent_marginal != dict(_mu_rows(zvec)):
        raise AssertionError(
            f"parallel node {nid}: combination weights do not marginalize "
            "to the node's option weights")
    for marginal, groups, which in ((child1_marginal, groups1, c1),
                                    (child2_marginal, groups2, c2)):
        actual = {content: _group_total(groups, content)
                  for content in groups}
        if marginal != actual:
            raise AssertionError(
                f"parallel node {nid}: combination weights do not "
                f"marginalize to the groups of child {which}")

    terms: list[_Term] = []
    for pc, cc1, cc2, w in rows:
        a = groups1.get(cc1, [])
        b = groups2.get(cc2, [])
        for i, j, part in refine_linear([t.weight for t in a],
                                        [t.weight for t in b], w):
            terms.append(_Term(part, pc,
                               _combine_routing(a[i].routing, b[j].routing)))
    return _merge_terms(terms)


# ------------------------------------------------------------ full runs

@dataclass(frozen=True)
class UnsplittableRouting:
    paths: Mapping[int, tuple[str, ...]]

    def flow_matrix(self, inst: Instance) -> Multiflow:
        return Multiflow({(aid, cid): inst.demand(cid)
                          for cid, path in self.paths.items()
                          for aid in path})

    def totals(self, inst: Instance) -> dict[str, Fraction]:
        return total_flow(self.flow_matrix(inst),
                          (a.id for a in inst.graph.arcs))

    def sort_key(self) -> tuple:
        return tuple((cid, self.paths[cid]) for cid in sorted(self.paths))


@dataclass(frozen=True)
class ConvexDecomposition:
    terms: tuple[tuple[Fraction, UnsplittableRouting], ...]

    def support_size(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class BoundReport:
    mode: str
    d_max: Fraction
    max_deviation: Fraction
    support_size: int


def _ordered_path(inst: Instance, cid: int,
                  arcs: frozenset[str]) -> tuple[str, ...]:
    c = inst.commodity(cid)
    path = []
    at = c.source
    remaining = set(arcs)
    while at != c.sink:
        step = [a for a in inst.graph.out_arcs(at) if a.id in remaining]
        if len(step) != 1:
            raise AssertionError(
                f"routing of commodity {cid} is not a single path")
        path.append(step[0].id)
        remaining.discard(step[0].id)
        at = step[0].head
    if remaining:
        raise AssertionError(
            f"routing of commodity {cid} has spare arcs {sorted(remaining)}")
    return tuple(path)


def decompose_recursive(inst: Instance,
                        almost_flow: AlmostUnsplittableFlow
                        ) -> ConvexDecomposition:
    """Fold the tree bottom-up into a root decomposition."""
    X = almost_flow.flow
    tree = inst.tree
    shares = all_demand_shares(inst, X)
    partial: dict[int, list[_Term]] = {}
    for nid in tree.postorder():
        node = tree.node(nid)
        if node.kind == 'Q':
            partial[nid] = leaf_decomposition(inst, X, nid, shares)
        elif node.kind == 'S':
            c1, c2 = node.children
            partial[nid] = series_combine(inst, X, nid, partial.pop(c1),
                                          partial.pop(c2), shares)
        else:
            c1, c2 = node.children
            partial[nid] = parallel_combine(inst, X, nid, partial.pop(c1),
                                            partial.pop(c2), shares)
        assert sum(t.weight for t in partial[nid]) == 1
    root_terms = partial[tree.root]
    out = []
    for t in root_terms:
        paths = {cid: _ordered_path(inst, cid, arcs)
                 for cid, arcs in t.routing.items()}
        if set(paths) != {c.id for c in inst.commodities}:
            raise AssertionError("a term does not route every commodity")
        out.append((t.weight, UnsplittableRouting(paths)))
    out.sort(key=lambda term: term[1].sort_key())
    return ConvexDecomposition(tuple(out))


def decompose_unsplittable(inst: Instance, X: Multiflow,
                           bound: str = "dmax"
                           ) -> tuple[ConvexDecomposition, BoundReport]:
    """Full pipeline: almost-unsplittable transform, recursion, bounds."""
    if bound not in ("dmax", "2dmax"):
        raise GraphError(f"unknown bound mode {bound!r}")
    violation = check_conservation(inst, X)
    if violation is not None:
        raise GraphError(f"input flow violates conservation: {violation}")
    almost_flow = make_almost_unsplittable(inst, X)
    decomposition = decompose_recursive(inst, almost_flow)
    budget = inst.d_max if bound == "dmax" else 2 * inst.d_max
    totals = total_flow(X, (a.id for a in inst.graph.arcs))
    worst = ZERO
    for rho, routing in decomposition.terms:
        member = routing.totals(inst)
        for aid, x in totals.items():
            deviation = abs(member[aid] - x)
            worst = max(worst, deviation)
            if not deviation < budget:
                raise AssertionError(
                    f"term deviates by {deviation} >= {budget} on arc "
                    f"{aid!r}")
    report = BoundReport(bound, inst.d_max, worst,
                         decomposition.support_size())
    return decomposition, report


@dataclass(frozen=True)
class VerificationReport:
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_decomposition(inst: Instance, X: Multiflow,
                         decomposition: ConvexDecomposition
                         ) -> VerificationReport:
    """Independently re-check everything the decomposition promises."""
    failures: list[str] = []
    weights = [rho for rho, _ in decomposition.terms]
    if any(w <= 0 for w in weights):
        failures.append("non-positive coefficient")
    if sum(weights) != 1:
        failures.append(f"coefficients sum to {sum(weights)}, not 1")

    arc_ids = [a.id for a in inst.graph.arcs]
    combined = {aid: ZERO for aid in arc_ids}
    for rho, routing in decomposition.terms:
        member_flow = routing.flow_matrix(inst)
        if check_conservation(inst, member_flow) is not None:
            failures.append("a member violates conservation")
        for nid in inst.tree.preorder():
            if demand_shares(inst, member_flow, nid).fractional():
                failures.append("a member is not unsplittable")
                break
        for aid, v in routing.totals(inst).items():
            combined[aid] += rho * v
    totals = total_flow(X, arc_ids)
    if combined != totals:
        failures.append("weighted totals do not reconstruct the input")

    budget = inst.d_max
    for rho, routing in decomposition.terms:
        member = routing.totals(inst)
        if any(not abs(member[aid] - totals[aid]) < budget
               for aid in arc_ids):
            failures.append("a member breaks the strict deviation bound")
            break

    # Every member must realize a routing option of positive weight at
    # every tree node, measured against the almost unsplittable form.
    almost_flow = make_almost_unsplittable(inst, X)
    shares = all_demand_shares(inst, almost_flow.flow)
    for nid in inst.tree.preorder():
        allowed = {content for content, _ in _mu_rows(shares[nid])}
        fractional = shares[nid].fractional()
        fully = shares[nid].fully_routed()
        for _, routing in decomposition.terms:
            member_z = demand_shares(inst, routing.flow_matrix(inst), nid)
            routed = {i for i, v in member_z.z.items() if v == 1}
            if frozenset(routed & fractional) not in allowed \
                    or not fully <= routed \
                    or not routed <= fully | fractional:
                failures.append(
                    f"a member respects no positive-weight option at "
                    f"node {nid}")
                break
    return VerificationReport(tuple(failures))


def decomposition_hash(decomposition: ConvexDecomposition) -> str:
    """Stable digest of the terms, for report metadata."""
    payload = repr([(str(rho), sorted((cid, list(path))
                                      for cid, path in routing.paths.items()))
                    for rho, routing in decomposition.terms])
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
