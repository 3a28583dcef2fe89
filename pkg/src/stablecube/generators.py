"""Seeded instance families and perturbation drivers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cubekernel import Wallspace
from .errors import InputError, InvariantViolation
from .geomgraph import MetricGraph, grid_graph, hausdorff_distance, path_graph
from .hhsmodel import segmented_path_hhs, tree_product_hhs, trivial_hhs, validate_instance


def rng_for(seed):
    return np.random.default_rng(np.uint64(seed % (1 << 64)))


def random_tree(n, seed, max_degree=None):
    """Uniform attachment tree on vertices 0..n-1, optionally degree-capped."""
    if n < 1:
        raise InputError("a tree needs at least one vertex")
    rng = rng_for(seed)
    deg = [0] * n
    edges = []
    for v in range(1, n):
        while True:
            u = int(rng.integers(0, v))
            if max_degree is None or deg[u] < max_degree:
                break
        deg[u] += 1
        deg[v] += 1
        edges.append((u, v))
    return MetricGraph(range(n), edges, name=f"tree{n}-s{seed}")


def random_graph(n, extra, cycle_length, seed):
    """Random tree plus `extra` chords, each closing a cycle of length at
    most `cycle_length`.  Short cycles keep the graph uniformly hyperbolic."""
    if cycle_length < 3:
        raise InputError("chords must close cycles of length at least 3")
    T = random_tree(n, seed)
    rng = rng_for(seed + 1)
    edges = set(T.edge_list())
    added, attempts = 0, 0
    while added < extra and attempts < 50 * (extra + 1):
        attempts += 1
        u = int(rng.integers(0, n))
        row = T.row(T.idx(u))
        near = [int(w) for w in np.flatnonzero((row >= 2) & (row <= cycle_length - 1))]
        if not near:
            continue
        w = near[int(rng.integers(0, len(near)))]
        e = (min(u, w), max(u, w))
        if e not in edges:
            edges.add(e)
            added += 1
    return MetricGraph(range(n), sorted(edges), name=f"graph{n}-s{seed}")


def random_wallspace(n_points, n_walls, seed):
    """Random nondegenerate, pairwise distinct walls on 0..n_points-1.
    Most walls are edge cuts of two random trees on the ground set (mostly
    the first), giving long nested chains as well as crossings between the
    two trees; the rest are arbitrary bipartitions."""
    rng = rng_for(seed)
    ground = list(range(n_points))
    cuts = []
    for k in range(2):
        perm = rng.permutation(n_points)
        # mostly extend the latest vertex, so the trees are long and thin
        parent = {int(perm[i]): int(perm[i - 1] if rng.random() < 0.7 else perm[int(rng.integers(0, i))])
                  for i in range(1, n_points)}
        children = {}
        for c, par in parent.items():
            children.setdefault(par, []).append(c)
        for c in parent:
            below, stack = set(), [c]
            while stack:
                u = stack.pop()
                below.add(u)
                stack.extend(children.get(u, ()))
            cuts.append(frozenset(below))
    walls, keys = [], set()
    attempts = 0
    while len(walls) < n_walls and attempts < 200 * n_walls:
        attempts += 1
        u = rng.random()
        if u < 0.85:
            # cuts of the first tree are favoured, keeping the dimension low
            half = len(cuts) // 2
            R = cuts[int(rng.integers(0, half))] if u < 0.65 else cuts[int(rng.integers(half, len(cuts)))]
        else:
            R = frozenset(int(x) for x in np.flatnonzero(rng.random(n_points) < 0.5))
        L = frozenset(ground) - R
        if not L or not R:
            continue
        key = min(L, R, key=sorted)
        if key in keys:
            continue
        keys.add(key)
        walls.append((L, R))
    return Wallspace(ground, walls)


def random_configuration(vertices, size, seed, spread=False):
    """`size` vertex bitmasks drawn at random; with spread=True, after a
    random first point each next one is a farthest vertex (in l1) from those
    already chosen, which produces long move sequences."""
    rng = rng_for(seed)
    verts = sorted(vertices)
    if not spread:
        return tuple(verts[int(i)] for i in rng.integers(0, len(verts), size=size))
    out = [verts[int(rng.integers(0, len(verts)))]]
    while len(out) < size:
        gap = [min(bin(v ^ w).count("1") for w in out) for v in verts]
        best = max(gap)
        far = [v for v, d in zip(verts, gap) if d == best]
        out.append(far[int(rng.integers(0, len(far)))])
    return tuple(out)


# ---------------------------------------------------------------------
# instance specs


FAMILIES = ("path", "tree", "graph", "grid", "tree-product", "trivial", "segmented")


@dataclass(frozen=True)
class InstanceSpec:
    family: str
    sizes: tuple = ()
    params: dict = field(default_factory=dict)

    def to_json(self):
        return {"family": self.family, "sizes": list(self.sizes), "params": dict(sorted(self.params.items()))}


def generate_instance(spec, seed=0, validate=True):
    """A MetricGraph or an HHSInstance, deterministic in (spec, seed).
    HHS instances are validated and rejected if an axiom check fails."""
    fam, sz, p = spec.family, tuple(int(s) for s in spec.sizes), spec.params
    if fam == "path":
        return path_graph(_one(sz, fam))
    if fam == "tree":
        return random_tree(_one(sz, fam), seed, p.get("max_degree"))
    if fam == "graph":
        return random_graph(_one(sz, fam), int(p.get("extra", 3)), int(p.get("cycle_length", 4)), seed)
    if fam == "grid":
        if len(sz) != 2:
            raise InputError("grid takes two sizes")
        return grid_graph(*sz)
    if fam == "trivial":
        inner = p.get("graph", "path")
        h = trivial_hhs(generate_instance(InstanceSpec(inner, sz, p), seed, validate=False))
    elif fam == "tree-product":
        if not 2 <= len(sz) <= 3:
            raise InputError("tree-product takes two or three sizes")
        if p.get("random"):
            factors = [random_tree(s + 1, seed + k) for k, s in enumerate(sz)]
        else:
            factors = [path_graph(s) for s in sz]
        h = tree_product_hhs(factors)
    elif fam == "segmented":
        length = _one(sz, fam)
        segs = p.get("segments") or _default_segments(length)
        h = segmented_path_hhs(length, segs)
    else:
        raise InputError(f"unknown family {fam!r}; choose from {', '.join(FAMILIES)}")
    if validate:
        rep = validate_instance(h, samples=32, seed=seed)
        if not rep.passed:
            name = rep.failures()[0]
            raise InvariantViolation(f"generated instance fails the {name} check", rep.items[name].witness)
    return h


def _one(sz, fam):
    if len(sz) != 1:
        raise InputError(f"{fam} takes one size")
    return sz[0]


def _default_segments(length):
    """Two marked segments occupying the middle fifths of the path."""
    a = length // 5
    return [(a, 2 * a), (3 * a, 4 * a)]


# ---------------------------------------------------------------------
# perturbations


MODES = ("move-one", "move-all", "resample-within-1")


def perturb(g, F, seed, mode="move-one"):
    """F' with d_Haus(F, F') <= 1 and |F'| <= |F|."""
    F = sorted(set(F), key=g.idx)
    if not F:
        raise InputError("cannot perturb an empty set")
    rng = rng_for(seed)

    def step(x):
        nb = g.neighbors(x)
        return nb[int(rng.integers(0, len(nb)))] if nb else x

    if mode == "move-one":
        k = int(rng.integers(0, len(F)))
        out = F[:k] + [step(F[k])] + F[k + 1:]
    elif mode == "move-all":
        out = [step(x) for x in F]
    elif mode == "resample-within-1":
        out = []
        for x in F:
            ball = [x] + g.neighbors(x)
            out.append(ball[int(rng.integers(0, len(ball)))])
    else:
        raise InputError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    out = sorted(set(out), key=g.idx)
    d = hausdorff_distance(g, F, out)
    if d > 1:
        raise InvariantViolation("perturbation moved a point by more than one", d)
    return out
