"""Experiment suites: each one runs a family of instances, checks the exact
properties and measures the constants whose growth with scale is tested."""

from __future__ import annotations

import dataclasses
import functools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import oracles
from .combing import barycenter, bicombing_path, verify_barycenter_stability, verify_bicombing
from .cubekernel import CubeComplexV, apply_halfspace_bijection, dual_complex, l1_distance, linf_distance
from .errors import InputError
from .generators import perturb, random_configuration, random_graph, random_tree, random_wallspace, rng_for
from .geomgraph import path_graph, star_graph, weak_hull_mask
from .hhsmodel import (
    path_reflection,
    segmented_path_hhs,
    tree_product_hhs,
    trivial_hhs,
    validate_instance,
)
from .hullcubulation import (
    PLUS,
    CubulationParams,
    check_intersection_predicate,
    cubulate,
    cubulation_quality,
    refine_and_compare,
)
from .movecontract import verify_contraction
from .stabletree import build_stable_tree, classify_clusters, compare_stable_trees, tree_diagnostics

THREADS_ENV = "STABLECUBE_THREADS"
PLATEAU_FACTOR = 1.25


def threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise InputError(f"{THREADS_ENV} must be an integer") from None


def fan_out(fn, items):
    """Apply fn to every item; results come back in item order whatever the
    number of worker threads."""
    items = list(items)
    n = threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class SuiteResult:
    name: str
    checks: dict = field(default_factory=dict)  # check -> (ok, detail)
    measured: dict = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self):
        return all(ok for ok, _ in self.checks.values())

    def check(self, name, ok, detail=None):
        prev = self.checks.get(name)
        if prev is None or (prev[0] and not ok):
            self.checks[name] = (bool(ok), detail)

    def to_json(self):
        return {"name": self.name, "passed": self.passed, "runtime": round(self.runtime, 3),
                "checks": {k: {"ok": ok, "detail": _plain(d)} for k, (ok, d) in sorted(self.checks.items())},
                "measured": _plain(self.measured)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        return [_plain(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def plateau(series, factor=PLATEAU_FACTOR, additive=0):
    """Largest-scale value against the smallest-scale one."""
    scales = sorted(series)
    first, last = series[scales[0]], series[scales[-1]]
    return last <= factor * first + additive, {"first": first, "last": last, "factor": factor,
                                               "additive": additive}


def _timed(fn):
    @functools.wraps(fn)
    def run(*args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.runtime = time.perf_counter() - t
        return res

    return run


# ---------------------------------------------------------------------
# cube complexes


def _median_total(vertices):
    v = np.array(sorted(vertices), dtype=object if max(vertices).bit_length() > 62 else np.int64)
    for x in v:
        m = (x & v[:, None]) | (v[:, None] & v[None, :]) | (x & v[None, :])
        if not np.isin(m, v).all():
            return False, int(x)
    return True, None


@_timed
def dual_complex_suite(instances=300, max_walls=12, n_points=8, seed=0):
    """Vertex sets against exhaustive coherent orientations, totality of the
    median, and both metrics against BFS oracles."""
    res = SuiteResult("dual-complex")

    def trial(t):
        ws = random_wallspace(n_points, 1 + t % max_walls, seed + t)
        cc = dual_complex(ws)
        orc = oracles.coherent_orientations(ws)
        med = _median_total(cc.vertices)
        sk = oracles.skeleton_distances(cc.vertices)
        cm = oracles.cube_move_distances(ws, cc.vertices)
        l1_bad = next(((a, b) for a in cc.vertices for b in cc.vertices if l1_distance(cc, a, b) != sk[a][b]), None)
        li_bad = next(((a, b) for a in cc.vertices for b in cc.vertices if linf_distance(cc, a, b) != cm[a][b]),
                      None)
        return t, len(ws.walls), len(cc.vertices), cc.vertices == orc, med, l1_bad, li_bad

    rows = fan_out(trial, range(instances))
    for t, n, nv, same, med, l1_bad, li_bad in rows:
        res.check("vertices_match_enumeration", same, None if same else t)
        res.check("median_total", med[0], None if med[0] else (t, med[1]))
        res.check("l1_matches_skeleton_bfs", l1_bad is None, None if l1_bad is None else (t, l1_bad))
        res.check("linf_matches_cube_moves", li_bad is None, None if li_bad is None else (t, li_bad))
    res.measured = {"instances": len(rows), "max_walls": max(r[1] for r in rows),
                    "max_vertices": max(r[2] for r in rows)}
    return res


CONTRACTION_ITEMS = ("diam_inf_final", "step_size", "no_wall_crossed_twice", "no_wall_separates_start_end",
                     "image_dependence")
DELETION_ITEMS = ("deletion_step_count", "deletion_fellow_travel")


@_timed
def move_contract_suite(instances=500, max_walls=14, max_points=5, n_points=12, seed=0):
    """Contraction items on random complexes and configurations, with every
    single-wall deletion."""
    res = SuiteResult("move-contract")

    def trial(t):
        ws = random_wallspace(n_points, 1 + t % max_walls, seed + t)
        cc = dual_complex(ws)
        size = 1 + t % max_points
        f = random_configuration(cc.vertices, size, seed + 7919 * t, spread=bool(t % 2))
        rng = rng_for(seed + t)
        surj = list(range(size)) + [int(i) for i in rng.integers(0, size, size=2)]
        surj = [surj[int(i)] for i in rng.permutation(len(surj))]
        rep = verify_contraction(cc, f, deletions=range(cc.n), surjection=surj, structure=True)
        return t, cc.n, size, rep

    rows = fan_out(trial, range(instances))
    for t, n, size, rep in rows:
        for item, (ok, wit) in rep.items.items():
            res.check(item, ok, None if ok else (t, wit))
    res.measured = {"instances": len(rows), "max_walls": max(r[1] for r in rows),
                    "max_points": max(r[2] for r in rows), "max_steps": max(r[3].n for r in rows),
                    "max_fellow_travel": max(r[3].measured.get("max_fellow_travel", 0) for r in rows)}
    return res


# ---------------------------------------------------------------------
# stable trees


@_timed
def stable_tree_suite(instances=200, max_k=6, seed=0):
    """Branching bound, leaf containment, the non-E0 cluster bound and
    connectivity of the separation graph on random hyperbolic graphs."""
    res = SuiteResult("stable-tree")

    def trial(t):
        rng = rng_for(seed + t)
        n = int(rng.integers(30, 90))
        g = random_graph(n, extra=int(rng.integers(0, 6)), cycle_length=int(rng.integers(3, 6)), seed=seed + t)
        k = 2 + t % (max_k - 1)
        F = [g.vertices[int(i)] for i in rng.choice(g.n, size=k, replace=False)]
        hull = np.flatnonzero(weak_hull_mask(g, F))
        Y = [g.vertices[int(i)] for i in rng.choice(hull, size=min(len(hull), int(rng.integers(0, 4))),
                                                       replace=False)]
        T = build_stable_tree(g, F, Y)
        diag = tree_diagnostics(T, max_sources=16)
        cl = classify_clusters(g, T)
        return t, len(set(F)), diag, cl

    rows = fan_out(trial, range(instances))
    worst = {"branching_slack": None, "qi_additive": 0, "hausdorff_to_hull": 0, "shadow_overlap_diameter": 0}
    for t, k, diag, cl in rows:
        res.check("branching_bound", diag["branching"] <= diag["branching_bound"],
                  (t, diag["branching"], diag["branching_bound"]))
        res.check("leaves_in_F_union_Y", diag["leaves_in_F_union_Y"], t)
        res.check("is_tree", diag["is_tree"], t)
        res.check("non_e0_bound", cl["non_e0_count"] <= 2 * k - 2, (t, cl["non_e0_count"], 2 * k - 2))
        res.check("separation_graph_connected", cl["connected"], t)
        res.check("shadow_overlap_leaf_free", cl["shadow_overlap_leaf_free"], t)
        worst["shadow_overlap_diameter"] = max(worst["shadow_overlap_diameter"], cl["shadow_overlap_diameter"])
        worst["qi_additive"] = max(worst["qi_additive"], diag["qi_additive"])
        worst["hausdorff_to_hull"] = max(worst["hausdorff_to_hull"], diag["hausdorff_to_hull"])
        slack = diag["branching_bound"] - diag["branching"]
        worst["branching_slack"] = slack if worst["branching_slack"] is None else min(worst["branching_slack"], slack)
    res.measured = {"instances": len(rows), **worst}
    return res


def _tree_instance(kind, d):
    """Path of length d, or a three-legged star of leg length d/2."""
    if kind == "path":
        return path_graph(d), [0, d]
    g = star_graph(3, d // 2)
    return g, [j * (d // 2) for j in (1, 2, 3)]


@_timed
def tree_perturbation_suite(diameters=(50, 100, 200, 400), unit=1, trials=12, seed=0):
    """Exception and complement counts of the tree correspondence under
    d_Haus(F, F') <= 1 and |Y sym-diff Y'| <= 3, per diameter (in multiples
    of `unit`; pass unit="E" for the cluster threshold of trees)."""
    res = SuiteResult("tree-perturbation")
    if unit == "E":
        unit = build_stable_tree(path_graph(2), [0, 2]).params.E
    per_scale = {}
    for d in (int(x * unit) for x in diameters):
        worst = {"exceptions": 0, "complement_count": 0, "complement_diameter": 0}
        for kind in ("path", "star"):
            g, F0 = _tree_instance(kind, d)
            for t in range(trials):
                rng = rng_for(seed + t)
                hull = np.flatnonzero(weak_hull_mask(g, F0))
                # Y and its perturbation are chosen by relative position so every scale sees the same shapes
                fr = rng.random(4)
                Y = sorted({g.vertices[int(hull[int(f * (len(hull) - 1))])] for f in fr})
                F = F0 + ([g.vertices[int(hull[len(hull) // 3])]] if t % 2 else [])
                Fp = perturb(g, F, seed + t, mode=("move-one", "move-all", "resample-within-1")[t % 3])
                Yp = list(Y)
                if Yp:
                    Yp.pop(int(rng.integers(0, len(Yp))))
                moved = g.neighbors(Y[-1]) if Y else []
                if moved:
                    Yp.append(moved[0])
                T = build_stable_tree(g, F, Y)
                Tp = build_stable_tree(g, Fp, Yp)
                corr = compare_stable_trees(T, Tp, N=3)
                m = corr.measured
                worst["exceptions"] = max(worst["exceptions"], m["exceptions"])
                worst["complement_count"] = max(worst["complement_count"], m["complement_count"])
                worst["complement_diameter"] = max(worst["complement_diameter"], m["complement_diameter"])
        per_scale[d] = worst
    for key in ("exceptions", "complement_count", "complement_diameter"):
        ok, det = plateau({d: v[key] for d, v in per_scale.items()}, factor=1, additive=1)
        res.check(f"{key}_plateau", ok, det)
    res.measured = {"unit": unit, "per_diameter": per_scale}
    return res


# ---------------------------------------------------------------------
# cubulations


def probe_M(seed=0):
    """Calibrated M-floor of the trivial instance on a path."""
    h = trivial_hhs(path_graph(400))
    return cubulate(h, [0, 400], CubulationParams(seed=seed)).params["M"]


def grid_oracle(a, b):
    return CubeComplexV(oracles.grid_complex_labels(a, b), oracles.grid_quarters(a, b),
                        oracles.grid_complex_vertices(a, b))


def certify_grid(cr):
    """Match the cubulation of a rectangle with the product-of-paths complex:
    walls of each factor are sorted along the factor's rooted tree."""
    dom = sorted({w.V for w in cr.walls})
    if len(dom) > 2:
        return False, {"reason": "walls in more than two domains", "domains": dom}
    per = []
    for V in dom:
        dt = cr.trees[V]
        ws = sorted((w for w in cr.walls if w.V == V), key=lambda w: dt.tin[w.point.node])
        per.append(ws)
    # a factor too short to carry subdivision points contributes no walls
    per += [[]] * (2 - len(per))
    oracle = grid_oracle(len(per[0]), len(per[1]))
    iota = {}
    for axis, ws in zip("xy", per):
        for k, w in enumerate(ws):
            iota[(w.label, PLUS)] = ((axis, k), 1)
            iota[(w.label, 1 - PLUS)] = ((axis, k), 0)
    r = apply_halfspace_bijection(cr.Q, oracle, iota)
    return r.ok, {"walls": (len(per[0]), len(per[1])), "reason": r.reason, "vertices": len(cr.Q.vertices)}


@_timed
def cubulation_suite(multiples=(50, 100, 200, 500, 1000), rectangles=((200, 150), (320, 96), (64, 64)), seed=0):
    """QI distortion and Hausdorff defect of Phi on trivial paths of length
    k*M for each multiple k; grid certification of rectangles."""
    res = SuiteResult("cubulation")
    M = probe_M(seed)
    per = {}
    for k in multiples:
        d = k * M
        h = trivial_hhs(path_graph(d))
        cr = cubulate(h, [0, d], CubulationParams(seed=seed))
        q = cubulation_quality(cr, seed=seed)
        res.check("M_consistent", cr.params["M"] == M, (k, cr.params["M"], M))
        res.check("dimension_bound", q["dimension"] <= q["max_orthogonal_family"], (k, q["dimension"]))
        per[k] = {key: q[key] for key in ("walls", "qi_slope", "qi_distortion", "hausdorff_to_hull",
                                         "b_diameter", "psi_error", "median_defect", "realisation_deviation")}
    for key in ("qi_distortion", "hausdorff_to_hull"):
        ok, det = plateau({k: v[key] for k, v in per.items()})
        res.check(f"{key}_plateau", ok, det)
    grids = {}
    for a, b in rectangles:
        h = tree_product_hhs([path_graph(a), path_graph(b)])
        cr = cubulate(h, [(0, 0), (a, b)], CubulationParams(seed=seed))
        ok, det = certify_grid(cr)
        res.check("rectangle_is_grid", ok, ((a, b), det))
        grids[f"{a}x{b}"] = det
    res.measured = {"M": M, "per_multiple": per, "rectangles": grids}
    return res


@_timed
def predicate_suite(multiples=(50, 100, 200, 500, 1000), seed=0):
    """Case-based halfspace intersection against the quarter table of Q, on
    the instances of the cubulation suite plus instances with nesting,
    transversality and orthogonality."""
    res = SuiteResult("intersection-predicate")
    M = probe_M(seed)
    runs = [(f"path{k}M", trivial_hhs(path_graph(k * M)), [0, k * M]) for k in multiples]
    runs.append(("rectangle", tree_product_hhs([path_graph(200), path_graph(150)]), [(0, 0), (200, 150)]))
    seg = segmented_path_hhs(40 * M, [(8 * M, 16 * M), (24 * M, 32 * M)])
    runs.append(("segmented", seg, [0, 40 * M]))
    runs.append(("segmented-inner", seg, [10 * M, 30 * M]))
    stats = {}
    for name, h, F in runs:
        cr = cubulate(h, F, CubulationParams(seed=seed))
        r = check_intersection_predicate(cr)
        res.check("agreement", r["agree"] == r["pairs"], (name, r["disagreements"][:3]))
        stats[name] = {"pairs": r["pairs"], "agree": r["agree"], "cases": r["cases"], "M": cr.params["M"]}
    res.measured = {"runs": stats}
    return res


def _scale_unit(unit, M):
    """Diameters are multiples of `unit`: "M" for the calibrated subdivision
    spacing, or a positive integer (1 gives literal diameters)."""
    if unit == "M":
        return M
    if isinstance(unit, int) and unit > 0:
        return unit
    raise InputError(f"unit must be 'M' or a positive integer, got {unit!r}")


def _path_cases(h, d, with_reflection=True):
    cases = [([0, d], [1, d]), ([0, d], [0, d - 1]), ([0, d // 3, d], [1, d // 3 + 1, d - 1]),
             ([5, d - 7], [6, d - 7])]
    if with_reflection:
        cases.append(([0, d - 1], [1, d], path_reflection(h)))
    return cases


@_timed
def stable_cubulation_suite(multiples=(50, 100, 200, 400), unit="M", seed=0):
    """Deletions needed for a certified isomorphism, commutation defect and
    exact psi-composites under perturbation, per scale k*M."""
    res = SuiteResult("stable-cubulation")
    M = probe_M(seed)
    scale = _scale_unit(unit, M)
    per = {}
    for k in multiples:
        d = k * scale
        h = trivial_hhs(path_graph(d))
        worst = {"N": 0, "defect": 0}
        for case in _path_cases(h, d):
            g = case[2] if len(case) > 2 else None
            rep = refine_and_compare(h, case[0], case[1], g=g, params=CubulationParams(seed=seed))
            res.check("certified", rep.certified, (k, case[:2], rep.reason, rep.violation))
            res.check("psi_composites_equal", rep.psi_exact, (k, case[:2]))
            worst["N"] = max(worst["N"], rep.N)
            worst["defect"] = max(worst["defect"], rep.commutation_defect)
        per[k] = worst
    ok, det = plateau({k: v["N"] for k, v in per.items()}, factor=1, additive=1)
    res.check("deletions_plateau", ok, det)
    ok, det = plateau({k: v["defect"] for k, v in per.items()})
    res.check("commutation_defect_plateau", ok, det)
    h = tree_product_hhs([path_graph(200), path_graph(150)])
    rep = refine_and_compare(h, [(0, 0), (200, 150)], [(1, 0), (200, 150)], params=CubulationParams(seed=seed))
    res.check("certified", rep.certified, ("rectangle", rep.reason))
    res.check("psi_composites_equal", rep.psi_exact, "rectangle")
    res.measured = {"M": M, "unit": scale, "per_multiple": per, "rectangle": rep.to_json()}
    return res


# ---------------------------------------------------------------------
# barycenters and bicombings


@_timed
def barycenter_suite(multiples=(50, 100, 200, 400), unit="M", seed=0):
    res = SuiteResult("barycenter")
    M = probe_M(seed)
    scale = _scale_unit(unit, M)
    per = {}
    for k in multiples:
        d = k * scale
        h = trivial_hhs(path_graph(d))
        rep = verify_barycenter_stability(h, _path_cases(h, d), CubulationParams(seed=seed), seed=seed)
        for kind, t, _ in rep.failures:
            res.check("permutation_invariant" if kind == "permutation" else "in_hull", False, (k, t))
        res.check("permutation_invariant", True)
        res.check("in_hull", True)
        offset = abs(barycenter(h, [0, d], CubulationParams(seed=seed)) - d / 2)
        per[k] = {**rep.measured, "midpoint_offset": offset}
    ok, det = plateau({k: v["kappa1"] for k, v in per.items()})
    res.check("kappa1_plateau", ok, det)
    ok, det = plateau({k: v["midpoint_offset"] for k, v in per.items()})
    res.check("midpoint_offset_bounded", ok, det)
    res.measured = {"M": M, "unit": scale, "per_multiple": per}
    return res


@_timed
def bicombing_suite(multiples=(50, 100, 200, 400), unit="M", seed=0):
    res = SuiteResult("bicombing")
    M = probe_M(seed)
    scale = _scale_unit(unit, M)
    per = {}
    for k in multiples:
        d = k * scale
        h = trivial_hhs(path_graph(d))
        pairs = [((0, d), (1, d)), ((0, d), (0, d - 1)), ((3, d - 5), (4, d - 4)),
                 ((d // 4, 3 * d // 4), (d // 4 + 1, 3 * d // 4 - 1))]
        rep = verify_bicombing(h, pairs, CubulationParams(seed=seed))
        res.check("no_wall_crossed_twice", rep.passed, (k, rep.failures[:2]))
        per[k] = rep.measured
    for key in ("kappa2", "qi_defect", "step_max", "backtrack"):
        ok, det = plateau({k: v[key] for k, v in per.items()})
        res.check(f"{key}_plateau", ok, det)
    h = tree_product_hhs([path_graph(200), path_graph(150)])
    path = bicombing_path(h, (0, 0), (200, 150), CubulationParams(seed=seed))
    inside = all(0 <= a <= 200 and 0 <= b <= 150 for a, b in path.steps)
    res.check("rectangle_path_in_hull", inside, path.steps)
    rrep = verify_bicombing(h, [(((0, 0), (200, 150)), ((1, 0), (200, 149)))], CubulationParams(seed=seed))
    res.check("no_wall_crossed_twice", rrep.passed, ("rectangle", rrep.failures[:2]))
    res.measured = {"M": M, "unit": scale, "per_multiple": per, "rectangle": rrep.measured}
    return res


# ---------------------------------------------------------------------
# validator


def corrupt_rho(h, seed=0):
    """Copy of h with one relative projection moved to another vertex;
    returns the copy and the changed key."""
    keys = sorted(h.rho, key=repr)
    if not keys:
        raise InputError("instance has no relative projections to corrupt")
    rng = rng_for(seed)
    key = keys[int(rng.integers(0, len(keys)))]
    n = h.factors[key[1]].n
    old = h.rho[key]
    new = (old + n // 2) % n if n > 1 else old
    rho = dict(h.rho)
    rho[key] = new
    return dataclasses.replace(h, rho=rho), key


@_timed
def validator_suite(seed=0):
    res = SuiteResult("validator")
    instances = {
        "trivial-path": trivial_hhs(path_graph(60)),
        "trivial-tree": trivial_hhs(random_tree(40, seed)),
        "tree-product-2": tree_product_hhs([path_graph(12), random_tree(10, seed)]),
        "tree-product-3": tree_product_hhs([path_graph(6), path_graph(5), random_tree(6, seed + 1)]),
    }
    kappa = {}
    for name, h in instances.items():
        rep = validate_instance(h, samples=48, seed=seed)
        res.check("builders_pass", rep.passed, (name, rep.failures()))
        kappa[name] = h.kappa0
    seg = segmented_path_hhs(120, [(20, 50), (70, 100)])
    res.check("builders_pass", validate_instance(seg, samples=48, seed=seed).passed, "segmented")
    detected = {}
    for s in range(3):
        bad, key = corrupt_rho(seg, seed + s)
        rep = validate_instance(bad, samples=48, seed=seed)
        fails = rep.failures()
        wit = [rep.items[f].witness for f in fails]
        ok = bool(fails) and all(w is not None for w in wit)
        res.check("mutation_detected", ok, (key, fails))
        detected[str(key)] = {"failures": fails, "witness": wit[0] if wit else None}
    res.measured = {"kappa0": kappa, "mutations": detected}
    return res


SUITES = {
    "dual-complex": dual_complex_suite,
    "move-contract": move_contract_suite,
    "stable-tree": stable_tree_suite,
    "tree-perturbation": tree_perturbation_suite,
    "cubulation": cubulation_suite,
    "intersection-predicate": predicate_suite,
    "stable-cubulation": stable_cubulation_suite,
    "barycenter": barycenter_suite,
    "bicombing": bicombing_suite,
    "validator": validator_suite,
}


def run_suite(name, seed=0, **kwargs):
    try:
        fn = SUITES[name]
    except KeyError:
        raise InputError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    return fn(seed=seed, **kwargs)
