"""Cubulating hierarchical hulls.

For every relevant domain V a stable tree is built inside C(V) from the
projections of F and the relative projections of relevant domains nested in
V.  The T_e edges of the trees are subdivided every M units; each
subdivision point p cuts its tree into two half-trees, and pulling them back
along the closest-point map beta^V gives a wall on the hull H_theta(F).  The
cube complex Q dual to these walls comes with a realisation map Phi to X and
with psi sending each f in F to its principal orientation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cubekernel import CubeComplexV, apply_halfspace_bijection, complex_from_masks, quarters_from_masks
from .errors import InputError, InvariantViolation, ParameterError, PreconditionError, ResourceError
from .geomgraph import delta_estimate, delta_sampled, hausdorff_distance
from .hhsmodel import calibrate_relevance, hull_mask, involved_domains, rel_set
from .stabletree import StableTreeParams, build_stable_tree, compare_stable_trees, tree_diagnostics

PLUS, MINUS = 1, 0


# ---------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class CubulationParams:
    """Unset values are derived: K by calibration, theta from the instance,
    eps per domain from the hyperbolicity of its factor, M from the
    measured floor and M' = 8 M."""

    K: int | None = None
    theta: int | None = None
    M: int | None = None
    M_prime: int | None = None
    eps: int | None = None
    exact_limit: int = 8
    max_walls: int = 5000
    max_vertices: int = 200_000
    quality_samples: int = 64
    seed: int = 0


def _domain_eps(h, V, eps):
    g = h.factors[V]
    if eps is not None:
        return int(eps)
    try:
        delta = delta_estimate(g)
    except ResourceError:
        delta = delta_sampled(g)
    return max(math.ceil(4 * Fraction(delta) + 4), math.ceil(2 * h.kappa0))


# ---------------------------------------------------------------------
# rooted domain trees


@dataclass
class DomainTree:
    """A stable tree rooted at its least leaf, with Euler intervals and the
    closest-point map beta from the factor graph onto the tree."""

    V: str
    tree: object
    root: int
    parent: np.ndarray
    tin: np.ndarray
    tout: np.ndarray
    order: np.ndarray  # nodes listed by tin
    beta: np.ndarray  # factor vertex index -> tree node

    @property
    def size(self):
        return self.tree.size

    def in_half(self, node, p, side):
        """Is `node` in the half-tree T_{p,side}?  PLUS is the set of proper
        descendants of p, MINUS the rest (containing p and the root)."""
        below = self.tin[p] < self.tin[node] <= self.tout[p]
        return below if side == PLUS else not below

    def half_mask(self, p, side):
        below = np.zeros(self.size, dtype=bool)
        below[self.order[self.tin[p] + 1:self.tout[p] + 1]] = True
        return below if side == PLUS else ~below

    def hull_of(self, marked):
        """Convex hull in the tree of a boolean node mask."""
        total = int(marked.sum())
        if total == 0:
            return marked.copy()
        pref = np.concatenate([[0], np.cumsum(marked[self.order])])
        sub = pref[self.tout + 1] - pref[self.tin]
        kids = np.zeros(self.size, dtype=np.int64)
        nonroot = np.flatnonzero(self.parent >= 0)
        np.add.at(kids, self.parent[nonroot], (sub[nonroot] > 0).astype(np.int64))
        comps = kids + (total - sub > 0)
        return marked | (comps >= 2)


def root_tree(V, T, factor):
    root = min(T.leaves(), key=T.node_key)
    n = T.size
    parent = np.full(n, -1, dtype=np.int64)
    tin = np.zeros(n, dtype=np.int64)
    tout = np.zeros(n, dtype=np.int64)
    order = []
    stack = [(root, -1, False)]
    while stack:
        a, par, done = stack.pop()
        if done:
            tout[a] = len(order) - 1
            continue
        parent[a] = par
        tin[a] = len(order)
        order.append(a)
        stack.append((a, par, True))
        for b in sorted(T.adj[a], key=T.node_key, reverse=True):
            if b != par:
                stack.append((b, a, False))
    beta = beta_labels(T, factor)
    return DomainTree(V, T, root, parent, tin, tout, np.array(order, dtype=np.int64), beta)


def beta_labels(T, g):
    """For every vertex c of the factor graph, the tree node whose image is
    closest to c; ties go to the least (image index, node id)."""
    ximg = np.array([g.idx(x) for x in T.xi], dtype=np.int64)
    dist = g.multi_source(np.unique(ximg))
    INF = (1 << 62)
    label_key = np.full(g.n, INF, dtype=np.int64)
    label = np.full(g.n, -1, dtype=np.int64)
    for a in range(T.size):
        key = int(ximg[a]) * (T.size + 1) + a
        if key < label_key[ximg[a]]:
            label_key[ximg[a]] = key
            label[ximg[a]] = a
    for v in np.argsort(dist, kind="stable"):
        if dist[v] == 0:
            continue
        best = INF
        for w in g.adj[v]:
            if dist[w] == dist[v] - 1 and label_key[w] < best:
                best = label_key[w]
        label_key[v] = best
        label[v] = best % (T.size + 1)
    return label


def beta_project(dt, h, c):
    """Tree node closest to the factor vertex c (a label of C(V))."""
    return int(dt.beta[h.factors[dt.V].idx(c)])


def build_domain_trees(h, F, K, eps=None, exact_limit=8):
    """One rooted stable tree per relevant domain."""
    F = list(F)
    U, sub = rel_set(h, F, K)
    trees, warnings = {}, []
    for V in sorted(U, key=h.order_key):
        g = h.factors[V]
        FV = {g.vertices[h.proj(V, x)] for x in F}
        YV = {g.vertices[h.rho[(W, V)]] for W in U if h.properly_nested(W, V)}
        e = _domain_eps(h, V, eps)
        T = build_stable_tree(g, FV, YV, StableTreeParams(eps=e, exact_limit=exact_limit))
        if not T.is_tree:
            raise InvariantViolation(f"stable tree of {V} is not a tree", V)
        warnings.extend(f"{V}: {w}" for w in T.warnings)
        trees[V] = root_tree(V, T, g)
    return trees, warnings


# ---------------------------------------------------------------------
# subdivisions


@dataclass(frozen=True)
class SubPoint:
    V: str
    segment: int
    position: int
    node: int

    @property
    def label(self):
        return (self.V, self.node)


@dataclass(frozen=True)
class SubdivisionSet:
    points: dict  # V -> tuple of SubPoint
    M: int
    M_prime: int

    def all(self):
        return [p for V in sorted(self.points) for p in self.points[V]]

    def labels(self):
        return [p.label for p in self.all()]

    def restrict(self, labels):
        keep = set(labels)
        unknown = keep - set(self.labels())
        if unknown:
            raise InputError(f"not subdivision points: {sorted(unknown)[:3]}")
        return SubdivisionSet({V: tuple(p for p in ps if p.label in keep) for V, ps in self.points.items()},
                              self.M, self.M_prime)

    def check(self, trees):
        """Interior placement and spacing in [M, M') along every edge."""
        bad = []
        for V, ps in self.points.items():
            segs = trees[V].tree.te_segments()
            by_seg = {}
            for p in ps:
                by_seg.setdefault(p.segment, []).append(p.position)
            for s, pos in by_seg.items():
                length = len(segs[s]) - 1
                marks = [0] + sorted(pos) + [length]
                gaps = [b - a for a, b in zip(marks, marks[1:])]
                if min(pos) <= 0 or max(pos) >= length or min(gaps) < self.M or max(gaps) >= self.M_prime:
                    bad.append((V, s, gaps))
        return bad


def subdivide(trees, M, M_prime):
    """Even subdivision of every T_e edge: points M, 2M, ... from the edge's
    least endpoint, stopping while at least M remains."""
    if M < 1 or M_prime < 8 * M:
        raise ParameterError(f"need M >= 1 and M' >= 8M (M={M}, M'={M_prime})")
    points = {}
    for V in sorted(trees):
        T = trees[V].tree
        out = []
        for s, seg in enumerate(T.te_segments()):
            length = len(seg) - 1
            pos = M
            while pos <= length - M:
                out.append(SubPoint(V, s, pos, seg[pos]))
                pos += M
        points[V] = tuple(out)
    return SubdivisionSet(points, M, M_prime)


# ---------------------------------------------------------------------
# walls and the cube complex


@dataclass
class HullWall:
    V: str
    point: SubPoint
    plus: np.ndarray  # boolean over hull positions: W_{p,+}

    @property
    def label(self):
        return self.point.label


def _bits_to_int(mask):
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


def _int_to_bits(x, n):
    nbytes = (n + 7) // 8
    raw = np.frombuffer(x.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


@dataclass
class CubulationResult:
    h: object
    F: tuple
    params: dict
    U: frozenset
    trees: dict
    subdivision: SubdivisionSet
    hull_idx: np.ndarray
    walls: list
    aliases: dict  # dropped label -> (kept label, flipped) for walls inducing the same partition
    degenerate: list
    Q: CubeComplexV
    principal: list  # per hull position, the orientation bitmask
    S: dict  # (Y, wall index, side) -> bigint over tree nodes of Y
    warnings: list = field(default_factory=list)
    _phi: dict = field(default_factory=dict)
    _dev: dict = field(default_factory=dict)

    # -- coordinates ----------------------------------------------------
    def hull_vertices(self):
        return [self.h.X.vertices[i] for i in self.hull_idx]

    def label_index(self, label):
        return self.Q.pos[label]

    def b(self, Y, v):
        """b_Y(v) as a bigint over the nodes of the tree of Y."""
        full = (1 << self.trees[Y].size) - 1
        acc = full
        for i in range(self.Q.n):
            s = self.S.get((Y, i, (v >> i) & 1))
            if s is not None:
                acc &= s
        return acc

    def b_nodes(self, Y, v):
        return np.flatnonzero(_int_to_bits(self.b(Y, v), self.trees[Y].size))

    def phi(self, v):
        if v not in self._phi:
            self._phi[v], self._dev[v] = self._realise(v)
        return self._phi[v]

    def deviation(self, v):
        self.phi(v)
        return self._dev[v]

    def _realise(self, v):
        """Hull vertex minimising the largest deviation of its projections
        from the coordinates b_Y(v); ties go to the smallest total distance
        to the tree centres of the b_Y, then to the least vertex index."""
        h = self.h
        if not self.trees:
            return h.X.vertices[int(self.hull_idx[0])], 0
        data = []
        exact = np.ones(self.hull_idx.size, dtype=bool)
        for Y, dt in self.trees.items():
            nodes = self.b_nodes(Y, v)
            if nodes.size == 0:
                raise InvariantViolation(f"empty coordinate b_{Y}", (Y, v))
            g = h.factors[Y]
            img = np.unique([g.idx(dt.tree.xi[a]) for a in nodes])
            proj = h.pi[Y][self.hull_idx]
            exact &= np.isin(proj, img)
            data.append((g, img, proj, g.idx(dt.tree.xi[_subtree_centre(dt, nodes)])))
        cand = np.flatnonzero(exact)
        dev = np.zeros(self.hull_idx.size, dtype=np.int64)
        if cand.size == 0:
            cand = np.arange(self.hull_idx.size)
            for g, img, proj, _ in data:
                dev = np.maximum(dev, g.multi_source(img)[proj])
        spread = np.zeros(cand.size, dtype=np.int64)
        for g, _, proj, centre in data:
            spread += g.row(centre)[proj[cand]]
        k = int(cand[np.lexsort((spread, dev[cand]))[0]])
        return h.X.vertices[int(self.hull_idx[k])], int(dev[k])

    def psi(self, f):
        pos = np.flatnonzero(self.hull_idx == self.h.X.idx(f))
        if pos.size == 0:
            raise InputError(f"{f!r} is not in the hull")
        return self.principal[int(pos[0])]

    def psi_map(self):
        return {f: self.psi(f) for f in self.F}

    def to_json(self):
        X = self.h.X
        verts = sorted(self.Q.vertices)
        return {
            "params": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.params.items()},
            "relevant": sorted(self.U),
            "trees": {V: dt.tree.to_json() for V, dt in self.trees.items()},
            "subdivision": [[p.V, p.segment, p.position, p.node] for p in self.subdivision.all()],
            "walls": [{"label": list(w.label), "plus": [X.vertices[i] for i in self.hull_idx[w.plus]]}
                      for w in self.walls],
            "Q": self.Q.to_json(),
            "phi": [[v, self.phi(v)] for v in verts],
            "psi": [[f, self.psi(f)] for f in self.F],
            "warnings": list(self.warnings),
        }


def m_floor(h, trees, F, eps_by_domain):
    """4 max(tree additive QI constant, rho-to-leaf distance, 2 eps)."""
    qi = 0
    for dt in trees.values():
        qi = max(qi, tree_diagnostics(dt.tree, max_sources=32)["qi_additive"])
    kappa = rho_leaf_distance(h, trees, F)
    two_eps = 2 * max(eps_by_domain.values(), default=0)
    return 4 * max(qi, kappa, two_eps, 1), {"qi_additive": qi, "kappa": kappa, "two_eps": two_eps}


def rho_leaf_distance(h, trees, F):
    """Largest distance from a relative projection between relevant domains
    to the projection of F: rho^U_V for U transverse to V, and rho^U_V(q)
    for V properly nested in U and q on the tree of U."""
    worst = 0
    U = list(trees)
    for V in U:
        g = h.factors[V]
        dF = g.multi_source(sorted({h.proj(V, x) for x in F}))
        for W in U:
            if h.transverse(W, V):
                worst = max(worst, int(dF[h.rho[(W, V)]]))
            if h.properly_nested(V, W):
                gw = h.factors[W]
                imgs = {gw.idx(x) for x in trees[W].tree.xi}
                mapped = h.rho_map[(W, V)][sorted(imgs)]
                worst = max(worst, int(dF[mapped].max()))
    return worst


def _resolve(h, F, params):
    K = params.K if params.K is not None else calibrate_relevance(h, seed=params.seed)
    theta = params.theta if params.theta is not None else int(h.constants["theta_hull"])
    return K, theta


def cubulate(h, F, params=None, subdivision=None, trees=None):
    """Cube complex of the hull of F with its realisation data."""
    params = params or CubulationParams()
    F = tuple(sorted(set(F), key=h.X.idx))
    if not F:
        raise InputError("F must be nonempty")
    K, theta = _resolve(h, F, params)
    U, _ = rel_set(h, F, K)
    warnings = []
    if trees is None:
        trees, warnings = build_domain_trees(h, F, K, params.eps, params.exact_limit)
    eps_by = {V: _domain_eps(h, V, params.eps) for V in trees}
    floor, floor_parts = m_floor(h, trees, F, eps_by)
    M = params.M if params.M is not None else floor
    M_prime = params.M_prime if params.M_prime is not None else 8 * M
    if M < floor:
        warnings.append(f"M={M} is below the measured floor {floor}")
    if subdivision is None:
        subdivision = subdivide(trees, M, M_prime)
    hm = hull_mask(h, F, theta)
    hull_idx = np.flatnonzero(hm)
    resolved = {"K": K, "theta": theta, "M": subdivision.M, "M_prime": subdivision.M_prime, "M_floor": floor,
                **{f"floor_{k}": v for k, v in floor_parts.items()}, "eps": eps_by}
    return _assemble(h, F, resolved, U, trees, subdivision, hull_idx, warnings, params)


def _assemble(h, F, resolved, U, trees, subdivision, hull_idx, warnings, params):
    pts = subdivision.all()
    if len(pts) > params.max_walls:
        raise ResourceError(f"{len(pts)} walls exceeds the bound {params.max_walls}")
    beta_hull = {V: dt.beta[h.pi[V][hull_idx]] for V, dt in trees.items()}
    walls, aliases, degenerate, seen = [], {}, [], {}
    for p in pts:
        dt = trees[p.V]
        b = beta_hull[p.V]
        tb = dt.tin[b]
        plus = (tb > dt.tin[p.node]) & (tb <= dt.tout[p.node])
        if plus.all() or not plus.any():
            degenerate.append(p.label)
            continue
        key, flip = plus.tobytes(), False
        if key not in seen and (~plus).tobytes() in seen:
            key, flip = (~plus).tobytes(), True
        if key in seen:
            aliases[p.label] = (seen[key], flip)
            continue
        seen[key] = p.label
        walls.append(HullWall(p.V, p, plus))
    n = len(walls)
    nh = hull_idx.size
    if n:
        mat = np.stack([w.plus for w in walls])  # walls x hull
        packed = np.packbits(mat, axis=0, bitorder="little")
        principal = [int.from_bytes(packed[:, j].tobytes(), "little") for j in range(nh)]
    else:
        principal = [0] * nh
    labels = [w.label for w in walls]
    Q = complex_from_masks(principal, n, labels=labels, max_vertices=params.max_vertices,
                           quarters=quarters_from_masks(principal, n))
    S = {}
    for Y, dt in trees.items():
        full = (1 << dt.size) - 1
        b = beta_hull[Y]
        for i, w in enumerate(walls):
            for side, sel in ((PLUS, w.plus), (MINUS, ~w.plus)):
                marked = np.zeros(dt.size, dtype=bool)
                marked[b[sel]] = True
                s = _bits_to_int(dt.hull_of(marked))
                if s != full:
                    S[(Y, i, side)] = s
    return CubulationResult(h, F, resolved, U, trees, subdivision, hull_idx, walls, aliases, degenerate,
                            Q, principal, S, warnings)


# ---------------------------------------------------------------------
# quality


def _l1(a, b):
    return bin(a ^ b).count("1")


def coarse_median_point(h, cr, xs):
    """Hull point whose projections are closest (max over domains) to the
    factor-wise medians of three points."""
    hull = cr.hull_idx
    dev = np.zeros(hull.size, dtype=np.int64)
    for Y in h.domains:
        g = h.factors[Y]
        rows = [g.row(h.proj(Y, x)).astype(np.int64) for x in xs]
        total = rows[0] + rows[1] + rows[2]
        m = int(np.argmin(total))
        dev = np.maximum(dev, g.row(m)[h.pi[Y][hull]])
    return h.X.vertices[int(hull[int(np.argmin(dev))])]


def cubulation_quality(cr, samples=None, seed=0):
    h = cr.h
    X = h.X
    rng = np.random.default_rng(seed)
    samples = samples or 64
    verts = sorted(cr.Q.vertices)
    out = {"walls": cr.Q.n, "vertices": len(verts), "degenerate_walls": len(cr.degenerate),
           "duplicate_walls": len(cr.aliases)}
    xi = 0
    for v in verts:
        for Y, dt in cr.trees.items():
            nodes = cr.b_nodes(Y, v)
            if nodes.size == 0:
                raise InvariantViolation(f"empty coordinate b_{Y}", v)
            xi = max(xi, _subtree_diameter(dt, nodes))
    out["b_diameter"] = xi
    out["realisation_deviation"] = max(cr.deviation(v) for v in verts)
    out["psi_error"] = max(X.dist(cr.phi(cr.psi(f)), f) for f in cr.F)
    # QI fit over all pairs from a sample of source vertices, one distance row per source
    vidx = np.array([X.idx(cr.phi(v)) for v in verts], dtype=np.int64)
    n_src = min(len(verts), samples)
    sources = sorted(rng.choice(len(verts), size=n_src, replace=False).tolist())
    dq_parts, dx_parts = [], []
    for a in sources:
        dq_parts.append(np.array([_l1(verts[a], w) for w in verts], dtype=float))
        dx_parts.append(X.row(int(vidx[a]))[vidx].astype(float))
    dq, dx = np.concatenate(dq_parts), np.concatenate(dx_parts)
    if (dq ** 2).sum() > 0:
        lam = float((dq * dx).sum() / (dq ** 2).sum())
        out["qi_slope"] = lam
        out["qi_distortion"] = float(np.abs(dx - lam * dq).max() / lam) if lam > 0 else float("inf")
    else:
        out["qi_slope"], out["qi_distortion"] = 1.0, 0.0
    image = sorted({X.idx(cr.phi(v)) for v in verts})
    d = X.multi_source(image)
    out["hausdorff_to_hull"] = int(d[cr.hull_idx].max())
    med = 0
    for _ in range(min(samples, 24) if len(verts) >= 3 else 0):
        a, b, c = (verts[int(i)] for i in rng.integers(0, len(verts), size=3))
        m = (a & b) | (b & c) | (a & c)
        target = coarse_median_point(h, cr, [cr.phi(a), cr.phi(b), cr.phi(c)])
        med = max(med, X.dist(cr.phi(m), target))
    out["median_defect"] = med
    out["dimension"] = cr.Q.dimension()
    out["max_orthogonal_family"] = max_orthogonal_family(h)
    return out


def max_orthogonal_family(h):
    best = 1
    doms = list(h.domains)
    for r in range(2, len(doms) + 1):
        for combo in itertools.combinations(doms, r):
            if all(h.orthogonal(a, b) for a, b in itertools.combinations(combo, 2)):
                best = r
    return best


def _subtree_far(dt, inside, s):
    adj = dt.tree.adj
    dist = {s: 0}
    parent = {s: None}
    stack = [s]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w in inside and w not in dist:
                dist[w] = dist[u] + 1
                parent[w] = u
                stack.append(w)
    t = max(dist, key=lambda a: (dist[a], -a))
    return t, dist[t], parent


def _subtree_centre(dt, nodes):
    """Middle node of a longest path of the subtree spanned by `nodes`."""
    inside = set(int(a) for a in nodes)
    a, _, _ = _subtree_far(dt, inside, min(inside))
    b, d, parent = _subtree_far(dt, inside, a)
    for _ in range(d // 2):
        b = parent[b]
    return b


def _subtree_diameter(dt, nodes):
    if nodes.size <= 1:
        return 0
    inside = set(int(a) for a in nodes)
    adj = dt.tree.adj

    def far(s):
        dist = {s: 0}
        stack = [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in inside and w not in dist:
                    dist[w] = dist[u] + 1
                    stack.append(w)
        t = max(dist, key=dist.get)
        return t, dist[t]

    t, _ = far(int(nodes[0]))
    return far(t)[1]


# ---------------------------------------------------------------------
# halfspace intersection


def halfspaces_intersect_predicate(cr, i, sigma, j, tau):
    """Tree-level criterion for W_{p,sigma} meeting W_{q,tau}; returns
    (answer, case tag)."""
    h = cr.h
    wi, wj = cr.walls[i], cr.walls[j]
    V, Z = wi.V, wj.V
    p, q = wi.point.node, wj.point.node
    if h.orthogonal(V, Z):
        return True, "orthogonal"
    if V == Z:
        dt = cr.trees[V]
        return bool((dt.half_mask(p, sigma) & dt.half_mask(q, tau)).any()), "same"
    if h.properly_nested(Z, V):
        return _nested_case(cr, Z, q, tau, V, p, sigma)
    if h.properly_nested(V, Z):
        return _nested_case(cr, V, p, sigma, Z, q, tau)
    dV, dZ = cr.trees[V], cr.trees[Z]
    a = dZ.in_half(int(dZ.beta[h.rho[(V, Z)]]), q, tau)
    b = dV.in_half(int(dV.beta[h.rho[(Z, V)]]), p, sigma)
    return bool(a or b), "transverse"


def _nested_case(cr, V, p, sigma, Z, q, tau):
    """V properly nested in Z."""
    h = cr.h
    dV, dZ = cr.trees[V], cr.trees[Z]
    if dZ.in_half(int(dZ.beta[h.rho[(V, Z)]]), q, tau):
        return True, "nested-outer"
    gz = h.factors[Z]
    c = int(h.rho_map[(Z, V)][gz.idx(dZ.tree.xi[q])])
    if dV.in_half(int(dV.beta[c]), p, sigma):
        return True, "nested-inner"
    return False, "nested"


def same_domain_table(dt, nodes):
    """meets[(sigma, tau)][i, j]: does T_{p_i,sigma} meet T_{p_j,tau}, for
    subdivision nodes p_i of one rooted tree.  PLUS sides are the Euler
    intervals (tin, tout], which form a laminar family, and both MINUS sides
    contain the root."""
    lo, hi = dt.tin[nodes], dt.tout[nodes]
    nonempty = hi > lo
    a_lo, a_hi = lo[:, None], hi[:, None]
    b_lo, b_hi = lo[None, :], hi[None, :]
    overlap = (a_lo < b_hi) & (b_lo < a_hi)
    inside = (a_lo >= b_lo) & (a_hi <= b_hi)  # PLUS_i within PLUS_j
    return {
        (PLUS, PLUS): overlap & nonempty[:, None] & nonempty[None, :],
        (PLUS, MINUS): nonempty[:, None] & ~inside,
        (MINUS, PLUS): (nonempty[None, :] & ~inside.T),
        (MINUS, MINUS): np.ones((len(nodes), len(nodes)), dtype=bool),
    }


def check_intersection_predicate(cr):
    """Compare the criterion with the quarter table of Q on every pair."""
    n = cr.Q.n
    Qt = np.array(cr.Q.quarters, dtype=np.int64).reshape(n, n) if n else np.zeros((0, 0), dtype=np.int64)
    bad, tags = [], {}
    agree = total = 0
    by_dom = {}
    for i, w in enumerate(cr.walls):
        by_dom.setdefault(w.V, []).append(i)
    same = np.zeros((n, n), dtype=bool)
    for V, idx in by_dom.items():
        idx = np.array(idx)
        table = same_domain_table(cr.trees[V], np.array([cr.walls[i].point.node for i in idx]))
        sub = np.ix_(idx, idx)
        same[sub] = True
        iu = np.triu_indices(len(idx), k=1)
        for (sigma, tau), pred in table.items():
            truth = (Qt[sub] & (1 << (2 * sigma + tau))) != 0
            ok = pred[iu] == truth[iu]
            total += ok.size
            agree += int(ok.sum())
            tags["same"] = tags.get("same", 0) + ok.size
            for k in np.flatnonzero(~ok)[:20 - len(bad)]:
                i, j = idx[iu[0][k]], idx[iu[1][k]]
                bad.append((cr.walls[i].label, sigma, cr.walls[j].label, tau, "same", bool(truth[iu][k])))
    for i, j in itertools.combinations(range(n), 2):
        if same[i, j]:
            continue
        for sigma in (0, 1):
            for tau in (0, 1):
                truth = bool(Qt[i, j] & (1 << (2 * sigma + tau)))
                ans, tag = halfspaces_intersect_predicate(cr, i, sigma, j, tau)
                tags[tag] = tags.get(tag, 0) + 1
                total += 1
                if ans == truth:
                    agree += 1
                elif len(bad) < 20:
                    bad.append((cr.walls[i].label, sigma, cr.walls[j].label, tau, tag, truth))
    return {"pairs": total, "agree": agree, "disagreements": bad, "cases": tags}


# ---------------------------------------------------------------------
# deletion


def delete_subdivision_points(cr, keep, params=None):
    """Rebuild over a subset of the subdivision; returns the new result, the
    restriction map on Q-vertices, and the commutation defect."""
    params = params or CubulationParams()
    keep = set(keep)
    all_labels = set(cr.subdivision.labels())
    if not keep <= all_labels:
        raise InputError("kept points must be subdivision points")
    sub = cr.subdivision.restrict(keep)
    cr2 = _assemble(cr.h, cr.F, dict(cr.params), cr.U, cr.trees, sub, cr.hull_idx, list(cr.warnings), params)
    hmap = restriction_map(cr, cr2)
    defect = max(cr.h.X.dist(cr.phi(v), cr2.phi(hmap[v])) for v in cr.Q.vertices)
    return cr2, hmap, defect


def restriction_map(cr, cr2):
    """Vertex map Q -> Q' forgetting walls that are not in Q'."""
    src = []
    for lab in cr2.Q.labels:
        if lab in cr.Q.pos:
            src.append((cr.Q.pos[lab], False))
        elif lab in cr.aliases:
            kept, flip = cr.aliases[lab]
            src.append((cr.Q.pos[kept], flip))
        else:
            raise InvariantViolation("wall of the smaller complex is unknown to the larger", lab)

    def restrict(v):
        out = 0
        for new, (old, flip) in enumerate(src):
            if ((v >> old) & 1) ^ flip:
                out |= 1 << new
        return out

    out = {v: restrict(v) for v in cr.Q.vertices}
    missing = set(out.values()) - set(cr2.Q.vertices)
    if missing:
        raise InvariantViolation("restriction left the smaller complex", sorted(missing)[:3])
    return out


# ---------------------------------------------------------------------
# comparing the cubulations of nearby sets


@dataclass
class StableCubulationReport:
    deleted: int
    deleted_prime: int
    certified: bool
    commutation_defect: int
    psi_exact: bool
    reason: str = ""
    violation: object = None
    details: dict = field(default_factory=dict)

    @property
    def N(self):
        return max(self.deleted, self.deleted_prime)

    def to_json(self):
        return {"deleted": self.deleted, "deleted_prime": self.deleted_prime, "N": self.N,
                "certified": self.certified, "commutation_defect": self.commutation_defect,
                "psi_exact": self.psi_exact, "reason": self.reason, "violation": _plain(self.violation),
                "details": _plain(self.details)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    return x


def _map_point(h, g, x):
    return x if g is None else g.point(h, x)


def refine_and_compare(h, F, Fp, g=None, params=None):
    params = params or CubulationParams()
    F = tuple(sorted(set(F), key=h.X.idx))
    Fp = tuple(sorted(set(Fp), key=h.X.idx))
    gF = {_map_point(h, g, x) for x in F}
    dH = hausdorff_distance(h.X, gF, Fp)
    if dH > 1:
        raise PreconditionError("inputs are more than distance one apart", dH)
    K, theta = _resolve(h, F, params)
    par = CubulationParams(**{**params.__dict__, "K": K, "theta": theta})
    cr = cubulate(h, F, par)
    M, Mp = cr.subdivision.M, cr.subdivision.M_prime
    crp = cubulate(h, Fp, CubulationParams(**{**par.__dict__, "M": M, "M_prime": Mp}))
    gdom = (lambda V: V) if g is None else (lambda V: g.domains[V])
    keep, keep_p, jmap, jside = set(), set(), {}, {}
    details = {"involved": [], "dropped_domains": []}
    common = [V for V in sorted(cr.U, key=h.order_key) if gdom(V) in crp.U]
    details["dropped_domains"] = sorted(set(cr.U) - {V for V in common}) + \
        sorted(set(crp.U) - {gdom(V) for V in common})
    if g is None:
        inv = involved_domains(h, F, Fp, K)
    else:
        inv = set(common)
    for V in common:
        Vp = gdom(V)
        dt, dtp = cr.trees[V], crp.trees[Vp]
        if V not in inv and _same_tree(dt, dtp):
            for p in cr.subdivision.points[V]:
                keep.add(p.label)
                keep_p.add((Vp, p.node))
                jmap[p.label] = (Vp, p.node)
                jside[p.label] = {PLUS: PLUS, MINUS: MINUS}
            continue
        details["involved"].append(V)
        _match_domain(h, g, cr, crp, V, Vp, M, keep, keep_p, jmap, jside, details)
    # walls identified with one another inside a single cubulation must stay paired
    cr0, h0, _ = delete_subdivision_points(cr, keep, par)
    crp0, h0p, _ = delete_subdivision_points(crp, keep_p, par)
    iota, reason = {}, ""
    for lab in cr0.Q.labels:
        tgt = jmap.get(lab)
        if tgt is None or tgt not in crp0.Q.pos:
            reason = f"no partner for wall {lab}"
            break
        for s in (PLUS, MINUS):
            iota[(lab, s)] = (tgt, jside[lab][s])
    deleted = len(cr.subdivision.labels()) - len(keep)
    deleted_p = len(crp.subdivision.labels()) - len(keep_p)
    if reason or set(v[0] for v in iota.values()) != set(crp0.Q.labels):
        return StableCubulationReport(deleted, deleted_p, False, -1, False,
                                      reason or "walls without partners", None, details)
    res = apply_halfspace_bijection(cr0.Q, crp0.Q, iota)
    if not res.ok:
        viol = res.violation
        tags = None
        if viol and len(viol) == 2:
            (a, sa), (b, sb) = viol
            tags = (halfspaces_intersect_predicate(cr0, cr0.Q.pos[a], sa, cr0.Q.pos[b], sb),)
        return StableCubulationReport(deleted, deleted_p, False, -1, False, res.reason, (viol, tags), details)
    hhat = res.vertex_map
    X = h.X
    defect = 0
    for v in cr.Q.vertices:
        defect = max(defect, X.dist(_map_point(h, g, cr.phi(v)), crp0.phi(hhat[h0[v]])))
    for v in crp.Q.vertices:
        defect = max(defect, X.dist(crp.phi(v), crp0.phi(h0p[v])))
    psi_ok = True
    mismatches = []
    for tag, e in [("F", x) for x in F] + [("F'", x) for x in Fp]:
        iF = e if tag == "F" else _nearest(X, [x for x in F], e, g, h, inverse=True)
        iFp = e if tag == "F'" else _nearest(X, list(Fp), _map_point(h, g, e), None, h)
        left = hhat[h0[cr.psi(iF)]]
        right = h0p[crp.psi(iFp)]
        if left != right:
            psi_ok = False
            mismatches.append((tag, e))
    details["psi_mismatches"] = mismatches
    details["walls"] = (cr.Q.n, crp.Q.n, cr0.Q.n)
    return StableCubulationReport(deleted, deleted_p, True, defect, psi_ok, "", None, details)


def _nearest(X, pool, target, g, h, inverse=False):
    """Least point of `pool` (by vertex index) within one of target, where
    with inverse=True the condition is d(g(x), target) <= 1."""
    best = None
    for x in sorted(pool, key=X.idx):
        y = _map_point(h, g, x) if inverse else x
        if X.dist(y, target) <= 1:
            return x
        d = X.dist(y, target)
        if best is None or d < best[0]:
            best = (d, x)
    return best[1]


def _same_tree(dt, dtp):
    return dt.tree.xi == dtp.tree.xi and dt.tree.edge_tag == dtp.tree.edge_tag


def _match_domain(h, g, cr, crp, V, Vp, M, keep, keep_p, jmap, jside, details):
    """Order-preserving matching of subdivision points along corresponded
    edge pieces of the two trees of one domain."""
    dt, dtp = cr.trees[V], crp.trees[Vp]
    iso = None
    if g is not None:
        fm = g.factor_maps[V]
        gV = h.factors[V]
        gVp = h.factors[Vp]
        iso = {gV.vertices[i]: gVp.vertices[int(fm[i])] for i in range(gV.n)}
    corr = compare_stable_trees(dt.tree, dtp.tree, N=10 ** 9, g_iso=iso)
    details.setdefault("tree_L", {})[V] = corr.measured["L"]
    segs, segs_p = dt.tree.te_segments(), dtp.tree.te_segments()
    pts = {}
    for p in cr.subdivision.points[V]:
        pts.setdefault(p.segment, []).append(p)
    pts_p = {}
    for p in crp.subdivision.points[Vp]:
        pts_p.setdefault(p.segment, []).append(p)
    gfac = h.factors[Vp]

    def img(x):
        return iso[x] if iso else x

    matched_pairs = sorted({(i, j) for i, j, _ in corr.identical} | {(i, j) for i, j, _ in corr.close_segments})
    for i, j in matched_pairs:
        A, B = pts.get(i, []), pts_p.get(j, [])
        if not A or not B:
            continue
        seg_b = segs_p[j]
        b_vertices = [gfac.idx(dtp.tree.xi[a]) for a in seg_b]
        lo, hi = 2 * M, len(seg_b) - 1 - 2 * M
        # position of each F-side point along the F'-side segment
        mapped = []
        for p in A:
            row = gfac.row(gfac.idx(img(dt.tree.xi[p.node])))
            d = row[b_vertices]
            k = int(np.argmin(d))
            mapped.append((k, int(d[k]), p))
        mapped = [m for m in mapped if lo <= m[0] <= hi]
        if len(mapped) >= 2 and mapped[0][0] > mapped[-1][0]:
            mapped.reverse()
        Bs = [q for q in B if lo <= q.position <= hi]
        a_i, b_i = 0, 0
        while a_i < len(mapped) and b_i < len(Bs):
            k, dist_off, p = mapped[a_i]
            q = Bs[b_i]
            if abs(k - q.position) + dist_off < 2 * M / 3:
                keep.add(p.label)
                keep_p.add(q.label)
                jmap[p.label] = q.label
                jside[p.label] = _side_pairing(dt, dtp, p.node, q.node, segs[i], seg_b, iso, gfac)
                a_i += 1
                b_i += 1
            elif k < q.position:
                a_i += 1
            else:
                b_i += 1


def _side_pairing(dt, dtp, p, q, seg_a, seg_b, iso, gfac):
    """Pair the half-trees at p and q: the side of p holding the start of
    its segment goes to the side of q holding the nearer end of q's segment."""
    start = seg_a[0]
    s_p = PLUS if dt.in_half(start, p, PLUS) else MINUS
    x = dt.tree.xi[start]
    x = iso[x] if iso else x
    row = gfac.row(gfac.idx(x))
    e0, e1 = seg_b[0], seg_b[-1]
    d0 = row[gfac.idx(dtp.tree.xi[e0])]
    d1 = row[gfac.idx(dtp.tree.xi[e1])]
    near = e0 if d0 <= d1 else e1
    s_q = PLUS if dtp.in_half(near, q, PLUS) else MINUS
    return {s_p: s_q, 1 - s_p: 1 - s_q}
