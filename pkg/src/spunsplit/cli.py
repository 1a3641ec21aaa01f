"""Command line front end and the JSON instance/decomposition formats.

All numbers cross the process boundary as exact rational strings such
as "3/4"; floats are rejected.  Output is deterministic: stable key
order and canonical rational formatting.

Exit codes: 0 success, 1 infeasibility or violation (with certificate),
2 malformed input, 3 internal invariant failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional

from .core import Digraph, GraphError, NotSeriesParallelError, SpTree
from .instance import Commodity, Instance, Multiflow, check_conservation, \
    total_flow
from .align import InfeasibleCut, align_instance, feasible_integer_multiflow, \
    map_flow_back, multiflow_from_transshipment, solve_transshipment, \
    to_transshipment
from .cuts import CutCertificate, check_cut
from .almost import make_almost_unsplittable
from .decompose import ConvexDecomposition, UnsplittableRouting, \
    decompose_unsplittable, decomposition_hash, verify_decomposition
from .oracle import exhaustive_feasibility, matrix_decomposability_probe

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_BAD_INPUT = 2
EXIT_INTERNAL = 3


class InputError(GraphError):
    pass


def parse_rational(value: Any, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise InputError(f"{where}: rationals must be strings or integers")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"{where}: bad rational {value!r}") from exc
    raise InputError(f"{where}: bad rational {value!r}")


def format_rational(value: Fraction) -> str:
    return str(value)


def _expect_keys(obj: Mapping[str, Any], where: str,
                 required: set[str], optional: set[str] = frozenset()
                 ) -> None:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    missing = required - obj.keys()
    unknown = obj.keys() - required - optional
    if missing:
        raise InputError(f"{where}: missing fields {sorted(missing)}")
    if unknown:
        raise InputError(f"{where}: unknown fields {sorted(unknown)}")


def load_instance(path: Path, require_sp: bool = True
                  ) -> tuple[Instance, Optional[Multiflow]]:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    _expect_keys(doc, str(path),
                 {"nodes", "terminals", "arcs", "commodities"}, {"flow"})
    _expect_keys(doc["terminals"], "terminals", {"source", "sink"})
    arcs = []
    caps = {}
    for entry in doc["arcs"]:
        _expect_keys(entry, "arcs[]", {"id", "tail", "head", "capacity"})
        arcs.append((entry["id"], entry["tail"], entry["head"]))
        caps[entry["id"]] = None if entry["capacity"] is None \
            else parse_rational(entry["capacity"], f"arc {entry['id']}")
    commodities = []
    for entry in doc["commodities"]:
        _expect_keys(entry, "commodities[]",
                     {"id", "source", "sink", "demand"})
        if not isinstance(entry["id"], int):
            raise InputError("commodity ids must be integers")
        commodities.append(Commodity(
            entry["id"], entry["source"], entry["sink"],
            parse_rational(entry["demand"], f"commodity {entry['id']}")))
    try:
        graph = Digraph.build(doc["nodes"], arcs, caps)
        inst = Instance.build(graph, doc["terminals"]["source"],
                              doc["terminals"]["sink"], commodities,
                              require_sp=require_sp)
    except NotSeriesParallelError:
        raise
    except GraphError as exc:
        raise InputError(str(exc)) from exc

    flow = None
    if "flow" in doc:
        values = {}
        arc_ids = {aid for aid, _, _ in arcs}
        known = {c.id for c in commodities}
        for aid, row in doc["flow"].items():
            if aid not in arc_ids:
                raise InputError(f"flow for unknown arc {aid!r}")
            for cid_str, value in row.items():
                cid = int(cid_str)
                if cid not in known:
                    raise InputError(f"flow for unknown commodity {cid}")
                values[(aid, cid)] = parse_rational(
                    value, f"flow[{aid}][{cid}]")
        flow = Multiflow(values)
    return inst, flow


def dump_json(obj: Any, out: Optional[Path] = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def flow_to_json(inst: Instance, X: Multiflow) -> dict:
    rows: dict[str, dict[str, str]] = {}
    for (aid, cid), v in sorted(X.items()):
        rows.setdefault(aid, {})[str(cid)] = format_rational(v)
    return rows


def tree_to_json(tree: SpTree) -> dict:
    nodes = []
    for nid in sorted(tree.nodes):
        node = tree.node(nid)
        entry: dict[str, Any] = {"id": nid, "kind": node.kind,
                                 "u": node.u, "v": node.v}
        if node.kind == 'Q':
            entry["arc"] = node.arc_id
        else:
            entry["children"] = list(node.children)
        nodes.append(entry)
    return {"root": tree.root, "nodes": nodes}


def certificate_to_json(cert: CutCertificate) -> dict:
    out: dict[str, Any] = {
        "kind": cert.kind,
        "capacity": format_rational(cert.capacity),
        "blocked_demand": format_rational(cert.blocked_demand),
        "blocked": sorted(cert.blocked),
    }
    if cert.witness_nodes is not None:
        out["nodes"] = sorted(cert.witness_nodes)
    if cert.witness_arcs is not None:
        out["arcs"] = sorted(cert.witness_arcs)
    return out


def decomposition_to_json(inst: Instance, decomposition: ConvexDecomposition,
                          bound: str) -> dict:
    terms = [{"rho": format_rational(rho),
              "paths": {str(cid): list(path)
                        for cid, path in sorted(routing.paths.items())}}
             for rho, routing in decomposition.terms]
    return {
        "terms": terms,
        "metadata": {
            "d_max": format_rational(inst.d_max),
            "bound": bound,
            "support_size": decomposition.support_size(),
            "reconstruction_hash": decomposition_hash(decomposition),
        },
    }


def decomposition_from_json(path: Path) -> ConvexDecomposition:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    _expect_keys(doc, str(path), {"terms"}, {"metadata"})
    terms = []
    for entry in doc["terms"]:
        _expect_keys(entry, "terms[]", {"rho", "paths"})
        rho = parse_rational(entry["rho"], "rho")
        paths = {int(cid): tuple(path)
                 for cid, path in entry["paths"].items()}
        terms.append((rho, UnsplittableRouting(paths)))
    return ConvexDecomposition(tuple(terms))


def _require_flow(flow: Optional[Multiflow]) -> Multiflow:
    if flow is None:
        raise InputError("this command needs a 'flow' field in the instance")
    return flow


# ------------------------------------------------------------- commands

def cmd_recognize(args: argparse.Namespace) -> int:
    try:
        inst, _ = load_instance(Path(args.instance))
    except NotSeriesParallelError as exc:
        dump_json({"error": "not-series-parallel",
                   "kernel": {
                       "nodes": sorted(exc.kernel.nodes),
                       "arcs": [{"id": a.id, "tail": a.tail, "head": a.head}
                                for a in exc.kernel.arcs]}})
        return EXIT_VIOLATION
    dump_json(tree_to_json(inst.tree))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    inst, _ = load_instance(Path(args.instance), require_sp=False)
    cert = check_cut(inst, args.cut)
    if cert is None:
        dump_json({"mode": args.cut, "ok": True})
        return EXIT_OK
    dump_json({"mode": args.cut, "ok": False,
               "certificate": certificate_to_json(cert)})
    return EXIT_VIOLATION


def cmd_solve(args: argparse.Namespace) -> int:
    inst, _ = load_instance(Path(args.instance))
    if args.integer:
        result = feasible_integer_multiflow(inst)
    else:
        aligned, amap = align_instance(inst)
        shipment = to_transshipment(aligned)
        solved = solve_transshipment(aligned.graph, shipment.b)
        if isinstance(solved, InfeasibleCut):
            result = solved
        else:
            result = map_flow_back(
                inst, amap, multiflow_from_transshipment(aligned, solved))
    if isinstance(result, InfeasibleCut):
        cert = check_cut(inst, "strengthened")
        payload: dict[str, Any] = {"feasible": False}
        if cert is not None:
            payload["certificate"] = certificate_to_json(cert)
        dump_json(payload)
        return EXIT_VIOLATION
    if check_conservation(inst, result) is not None:
        raise AssertionError("solver produced a non-conserving flow")
    dump_json({"feasible": True, "flow": flow_to_json(inst, result)})
    return EXIT_OK


def cmd_almost(args: argparse.Namespace) -> int:
    inst, flow = load_instance(Path(args.instance))
    almost_flow = make_almost_unsplittable(inst, _require_flow(flow))
    dump_json({
        "flow": flow_to_json(inst, almost_flow.flow),
        "fractional": {str(nid): list(ids)
                       for nid, ids in sorted(almost_flow.fractional.items())},
        "split": {str(nid): cid
                  for nid, cid in sorted(almost_flow.split.items())},
    })
    return EXIT_OK


def _decompose_one(instance_path: str, bound: str, probe: bool,
                   out: Optional[str]) -> int:
    inst, flow = load_instance(Path(instance_path))
    decomposition, report = decompose_unsplittable(
        inst, _require_flow(flow), bound)
    payload = decomposition_to_json(inst, decomposition, bound)
    payload["metadata"]["max_deviation"] = format_rational(
        report.max_deviation)
    if probe:
        certificate = matrix_decomposability_probe(inst, flow)
        payload["metadata"]["matrix_probe"] = (
            "matrix-not-decomposable" if certificate is not None
            else "inconclusive")
    dump_json(payload, Path(out) if out else None)
    return EXIT_OK


def cmd_decompose(args: argparse.Namespace) -> int:
    target = Path(args.instance)
    if target.is_dir():
        files = sorted(p for p in target.glob("*.json")
                       if not p.name.endswith(".decomposition.json"))
        jobs = [(str(p), args.bound, args.probe,
                 str(p.with_suffix(".decomposition.json"))) for p in files]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                list(pool.map(_decompose_worker, jobs))
        else:
            for job in jobs:
                _decompose_worker(job)
        return EXIT_OK
    return _decompose_one(args.instance, args.bound, args.probe, args.out)


def _decompose_worker(job: tuple[str, str, bool, str]) -> None:
    _decompose_one(*job)


def cmd_verify(args: argparse.Namespace) -> int:
    inst, flow = load_instance(Path(args.instance))
    decomposition = decomposition_from_json(Path(args.decomposition))
    report = verify_decomposition(inst, _require_flow(flow), decomposition)
    dump_json({"ok": report.ok, "failures": list(report.failures)})
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_oracle(args: argparse.Namespace) -> int:
    inst, flow = load_instance(Path(args.instance), require_sp=False)
    if args.mode == "feasibility":
        routing = exhaustive_feasibility(inst)
        if routing is None:
            dump_json({"feasible": False})
            return EXIT_VIOLATION
        dump_json({"feasible": True, "flow": flow_to_json(inst, routing)})
        return EXIT_OK
    if args.mode == "probe":
        certificate = matrix_decomposability_probe(inst, _require_flow(flow))
        if certificate is None:
            dump_json({"result": "inconclusive"})
            return EXIT_OK
        dump_json({"result": "matrix-not-decomposable",
                   "forced_arcs": list(certificate.forced),
                   "routings_ruled_out": certificate.tried})
        return EXIT_VIOLATION
    raise InputError(f"unknown oracle mode {args.mode!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spunsplit",
        description="Exact multiflow decomposition on series-parallel "
                    "digraphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recognize", help="build the decomposition tree")
    p.add_argument("instance")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("check", help="check a cut condition")
    p.add_argument("instance")
    p.add_argument("--cut", default="strengthened",
                   choices=["classical", "strengthened", "strong"])
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="find a feasible multiflow")
    p.add_argument("instance")
    p.add_argument("--integer", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("almost",
                       help="make the given flow almost unsplittable")
    p.add_argument("instance")
    p.set_defaults(func=cmd_almost)

    p = sub.add_parser("decompose",
                       help="decompose a flow into unsplittable routings")
    p.add_argument("instance", help="instance file or batch directory")
    p.add_argument("--bound", default="dmax", choices=["dmax", "2dmax"])
    p.add_argument("--probe", action="store_true",
                   help="also probe matrix decomposability")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="verify a decomposition file")
    p.add_argument("instance")
    p.add_argument("decomposition")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="brute-force cross checks")
    p.add_argument("instance")
    p.add_argument("--mode", default="feasibility",
                   choices=["feasibility", "probe"])
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
