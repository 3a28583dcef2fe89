"""Command-line front end.

    stablecube [--seed N] [--json | --dot] [--param key=value ...] COMMAND ...

Exit status is 0 on success, 1 when a check or suite fails, 2 on bad input
(including instances too large for the requested computation).
"""

from __future__ import annotations

import argparse
import dataclasses
import inspect
import json
import sys

from . import oracles
from .combing import barycenter_data, bicombing_path, path_quality
from .cubekernel import dual_complex, linf_distance
from .errors import InputError, InvariantViolation, ParameterError, PreconditionError, ResourceError
from .export import canonical_json
from .generators import FAMILIES, InstanceSpec, generate_instance, random_wallspace
from .geomgraph import MetricGraph, delta_estimate, steiner_network
from .hhsmodel import HHSInstance, hull_mask, validate_instance
from .hullcubulation import CubulationParams, cubulate, cubulation_quality
from .movecontract import move_sequence
from .stabletree import StableTreeParams, build_stable_tree, tree_diagnostics
from .suites import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

GENERATOR_KEYS = {"max_degree", "extra", "cycle_length", "random", "segments", "graph"}


# ---------------------------------------------------------------------
# argument helpers


def _value(text):
    try:
        return _tuplify(json.loads(text))
    except json.JSONDecodeError:
        return text


def _tuplify(x):
    """JSON lists become tuples so that product-space points are hashable;
    the outermost list of a point list is handled by the caller."""
    if isinstance(x, list):
        return tuple(_tuplify(v) for v in x)
    return x


def parse_params(pairs):
    out = {}
    for p in pairs or ():
        key, sep, val = p.partition("=")
        if not sep or not key:
            raise InputError(f"--param expects key=value, got {p!r}")
        out[key.strip()] = _value(val.strip())
    return out


def parse_points(text):
    if text is None:
        return []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"points must be a JSON list: {e}") from None
    if not isinstance(raw, list):
        raise InputError("points must be a JSON list")
    return [_tuplify(v) for v in raw]


def _split(params, cls):
    """Keys naming fields of the dataclass `cls`, the generator keys, and the
    rest (which is an error unless the command takes free keyword args)."""
    names = {f.name for f in dataclasses.fields(cls)} if cls else set()
    mine = {k: v for k, v in params.items() if k in names}
    gen = {k: v for k, v in params.items() if k in GENERATOR_KEYS}
    rest = {k: v for k, v in params.items() if k not in names and k not in GENERATOR_KEYS}
    return mine, gen, rest


def _reject(rest):
    if rest:
        raise InputError(f"unknown parameter(s): {', '.join(sorted(rest))}")


def _instance(args, gen):
    if args.family not in FAMILIES:
        raise InputError(f"unknown family {args.family!r}; choose from {', '.join(FAMILIES)}")
    return generate_instance(InstanceSpec(args.family, tuple(args.sizes), gen), seed=args.seed)


def _check_points(space, pts, what="point"):
    for p in pts:
        if p not in space.index:
            raise InputError(f"{what} {p!r} is not a vertex of the instance")


def _need_hhs(obj):
    if not isinstance(obj, HHSInstance):
        raise InputError("this command needs an HHS family (trivial, tree-product, segmented)")
    return obj


def _need_graph(obj):
    if isinstance(obj, HHSInstance):
        return obj.X
    return obj


# ---------------------------------------------------------------------
# commands; each returns (payload, dot_source or None, exit code)


def cmd_gen(args, params):
    _, gen, rest = _split(params, None)
    _reject(rest)
    obj = _instance(args, gen)
    payload = {"spec": InstanceSpec(args.family, tuple(args.sizes), gen).to_json(), "seed": args.seed,
               "instance": obj.to_json()}
    dot = obj.to_dot() if isinstance(obj, MetricGraph) else obj.X.to_dot()
    if isinstance(obj, HHSInstance) and args.validate:
        rep = validate_instance(obj, seed=args.seed)
        payload["validation"] = rep.to_json()
        return payload, dot, EXIT_OK if rep.passed else EXIT_FAIL
    return payload, dot, EXIT_OK


def cmd_tree(args, params):
    mine, gen, rest = _split(params, StableTreeParams)
    _reject(rest)
    g = _need_graph(_instance(args, gen))
    F, Y = parse_points(args.points), parse_points(args.anchors)
    _check_points(g, F + Y)
    T = build_stable_tree(g, F, Y, StableTreeParams(**mine))
    diag = tree_diagnostics(T)
    code = EXIT_OK if diag["is_tree"] and diag["leaves_in_F_union_Y"] else EXIT_FAIL
    return {"tree": T.to_json(), "diagnostics": diag}, T.to_dot(), code


def _cubulation_params(params):
    mine, gen, rest = _split(params, CubulationParams)
    _reject(rest)
    return CubulationParams(**mine), gen


def cmd_cubulate(args, params):
    cp, gen = _cubulation_params(params)
    h = _need_hhs(_instance(args, gen))
    F = parse_points(args.points)
    _check_points(h.X, F)
    cr = cubulate(h, F, cp)
    q = cubulation_quality(cr, seed=args.seed)
    return {"cubulation": cr.to_json(), "quality": q}, cr.Q.to_dot(), EXIT_OK


def cmd_bary(args, params):
    cp, gen = _cubulation_params(params)
    h = _need_hhs(_instance(args, gen))
    F = parse_points(args.points)
    _check_points(h.X, F)
    b = barycenter_data(h, F, cp)
    inside = bool(hull_mask(h, F, b.trace.cubulation.params["theta"])[h.X.idx(b.point)])
    payload = {"barycenter": b.point, "moves": b.trace.n, "cube": sorted(b.cube),
               "representative": b.representative, "in_hull": inside}
    return payload, b.trace.cubulation.Q.to_dot(), EXIT_OK if inside else EXIT_FAIL


def cmd_comb(args, params):
    cp, gen = _cubulation_params(params)
    h = _need_hhs(_instance(args, gen))
    (x,), (y,) = parse_points(f"[{args.x}]"), parse_points(f"[{args.y}]")
    _check_points(h.X, [x, y])
    path = bicombing_path(h, x, y, cp)
    q = path_quality(h, path)
    return {"path": path.to_json(), "quality": q}, None, EXIT_OK


def cmd_verify(args, params):
    names = args.suites or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InputError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    if params and len(names) != 1:
        raise InputError("--param applies to a single suite; name exactly one")
    if params:
        accepted = set(inspect.signature(SUITES[names[0]]).parameters)
        _reject(set(params) - accepted)
    results = [run_suite(n, seed=args.seed, **params) for n in names]
    payload = {"suites": [r.to_json() for r in results], "passed": all(r.passed for r in results)}
    return payload, None, EXIT_OK if payload["passed"] else EXIT_FAIL


# -- oracles ----------------------------------------------------------


def _oracle_steiner(args, params):
    _, gen, rest = _split(params, None)
    _reject(rest)
    g = _need_graph(_instance(args, gen))
    terms = parse_points(args.points)
    _check_points(g, terms)
    size = oracles.steiner_size(g, terms)
    out = {"oracle": size}
    if args.compare:
        net = steiner_network(g, [[t] for t in terms], exact_limit=len(terms))
        out["engine"] = len(net.edges)
    return out


def _oracle_orientations(args, params):
    ws = random_wallspace(int(params.pop("n_points", 8)), int(params.pop("n_walls", 8)), args.seed)
    _reject(params)
    verts = oracles.coherent_orientations(ws)
    out = {"walls": len(ws.walls), "oracle": len(verts)}
    if args.compare:
        cc = dual_complex(ws)
        out["engine"] = len(cc.vertices)
        out["same_vertices"] = frozenset(cc.vertices) == verts
    return out


def _oracle_moves(args, params):
    ws = random_wallspace(int(params.pop("n_points", 8)), int(params.pop("n_walls", 8)), args.seed)
    _reject(params)
    verts = sorted(oracles.coherent_orientations(ws))
    D = oracles.cube_move_distances(ws, verts)
    pts = parse_points(args.points) or [verts[0], verts[-1]]
    for p in pts:
        if p not in D:
            raise InputError(f"{p!r} is not a vertex of the dual complex")
    out = {"oracle": max(D[a][b] for a in pts for b in pts)}
    if args.compare:
        cc = dual_complex(ws)
        out["engine"] = max(linf_distance(cc, a, b) for a in pts for b in pts)
        out["contraction_steps"] = len(move_sequence(cc, tuple(pts))) - 1
    return out


def _oracle_hull(args, params):
    cp, gen = _cubulation_params(params)
    h = _need_hhs(_instance(args, gen))
    F = parse_points(args.points)
    _check_points(h.X, F)
    theta = cp.theta if cp.theta is not None else 0
    verts = oracles.hull_vertices(h, F, theta)
    out = {"theta": theta, "oracle": sorted(verts, key=h.X.idx)}
    if args.compare:
        mask = hull_mask(h, F, theta)
        out["engine"] = [h.X.vertices[i] for i in range(h.X.n) if mask[i]]
    return out


def _oracle_delta(args, params):
    _, gen, rest = _split(params, None)
    _reject(rest)
    g = _need_graph(_instance(args, gen))
    out = {"oracle": oracles.four_point_delta(g)}
    if args.compare:
        out["engine"] = float(delta_estimate(g))
    return out


ORACLES = {
    "steiner": _oracle_steiner,
    "orientations": _oracle_orientations,
    "cube-moves": _oracle_moves,
    "hull": _oracle_hull,
    "delta": _oracle_delta,
}


def cmd_oracle(args, params):
    out = ORACLES[args.which](args, dict(params))
    out["which"] = args.which
    code = EXIT_OK
    if args.compare:
        agree = out.get("same_vertices", out["oracle"] == out["engine"])
        out["agree"] = bool(agree)
        code = EXIT_OK if agree else EXIT_FAIL
    return out, None, code


# ---------------------------------------------------------------------
# parser


def _add_instance(p, default_family, default_sizes):
    p.add_argument("--family", default=default_family, help=f"one of {', '.join(FAMILIES)}")
    p.add_argument("--sizes", type=int, nargs="+", default=default_sizes, metavar="N")


def _global_flags(defaults):
    """Parent parser for the global flags.  It is attached to the main parser
    with real defaults and to every subcommand with suppressed ones, so the
    flags work on either side of the command name."""
    p = argparse.ArgumentParser(add_help=False)

    def d(value):
        return value if defaults else argparse.SUPPRESS

    p.add_argument("--seed", type=int, default=d(0))
    out = p.add_mutually_exclusive_group()
    out.add_argument("--json", action="store_true", default=d(False), help="print canonical JSON")
    out.add_argument("--dot", action="store_true", default=d(False),
                     help="print a Graphviz rendering where one exists")
    p.add_argument("--param", action="append", default=d([]), metavar="KEY=VALUE",
                   help="algorithm, generator or suite parameter; repeatable")
    return p


def build_parser():
    ap = argparse.ArgumentParser(prog="stablecube", parents=[_global_flags(True)],
                                 description="Stable trees, hull cubulations, barycenters and "
                                 "bicombings on finite instances.")
    common = _global_flags(False)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, text):
        return sub.add_parser(name, parents=[common], help=text)

    p = add("gen", "generate an instance")
    _add_instance(p, "tree", [20])
    p.add_argument("--validate", action="store_true", help="run the axiom checks on HHS instances")

    p = add("tree", "stable tree of a finite set in a graph")
    _add_instance(p, "tree", [40])
    p.add_argument("--points", required=True, help="JSON list of vertices")
    p.add_argument("--anchors", help="JSON list of extra leaf candidates")

    for name, text in (("cubulate", "cube complex of the hull of a finite set"),
                       ("bary", "coarse barycenter of a finite set")):
        p = add(name, text)
        _add_instance(p, "trivial", [400])
        p.add_argument("--points", required=True, help="JSON list of vertices")

    p = add("comb", "bicombing path between two points")
    _add_instance(p, "trivial", [400])
    p.add_argument("--x", required=True, help="start vertex as JSON")
    p.add_argument("--y", required=True, help="end vertex as JSON")

    p = add("verify", "run acceptance suites")
    p.add_argument("suites", nargs="*", metavar="SUITE", help=f"any of {', '.join(SUITES)} (default: all)")

    p = add("oracle", "brute-force reference values")
    p.add_argument("which", choices=sorted(ORACLES))
    _add_instance(p, "tree", [12])
    p.add_argument("--points", help="JSON list of vertices")
    p.add_argument("--compare", action="store_true", help="also run the engine and compare")
    return ap


COMMANDS = {"gen": cmd_gen, "tree": cmd_tree, "cubulate": cmd_cubulate, "bary": cmd_bary,
            "comb": cmd_comb, "verify": cmd_verify, "oracle": cmd_oracle}


def _summary(payload, code):
    """Short human-readable rendering of the top level of a payload."""
    lines = []
    for k, v in payload.items():
        text = canonical_json(v).strip()
        if len(text) > 200:
            text = text[:197] + "..."
        lines.append(f"{k}: {text}")
    lines.append("status: " + ("ok" if code == EXIT_OK else "FAILED"))
    return "\n".join(lines) + "\n"


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        params = parse_params(args.param)
        payload, dot, code = COMMANDS[args.command](args, params)
    except (InputError, ParameterError, PreconditionError, ResourceError) as e:
        print(f"stablecube: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as e:
        print(f"stablecube: check failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    if args.dot:
        if dot is None:
            print(f"stablecube: error: {args.command} has no DOT output", file=sys.stderr)
            return EXIT_INPUT
        sys.stdout.write(dot if dot.endswith("\n") else dot + "\n")
    elif args.json:
        sys.stdout.write(canonical_json(payload))
    else:
        sys.stdout.write(_summary(payload, code))
    return code


if __name__ == "__main__":
    sys.exit(main())
