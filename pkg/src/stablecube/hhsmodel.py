"""Explicit finite hierarchically hyperbolic instances.

An instance lists its domains, the nesting and orthogonality relations
(transversality is everything else), one hyperbolic factor graph per domain,
point-valued projections of X into each factor, point-valued relative
projections between related domains, and the nested maps between factors.
Everything is stored as dense integer tables over vertex indices, so the
checks below are plain array arithmetic.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InputError, InstanceError, ParameterError, PreconditionError
from .geomgraph import DENSE_LIMIT, MetricGraph, ProductGraph, hausdorff_distance, weak_hull_mask


# ---------------------------------------------------------------------
# helpers


def pair_dist(g, a, b):
    """Elementwise d_g(a[i], b[i]) for integer index arrays a, b."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    a, b = np.broadcast_arrays(a, b)
    if g.n <= DENSE_LIMIT:
        return g.table()[a, b].astype(np.int64)
    out = np.empty(a.shape, dtype=np.int64)
    ua, ub = np.unique(a), np.unique(b)
    key, other = (b, a) if len(ub) <= len(ua) else (a, b)
    for v in np.unique(key):
        sel = key == v
        out[sel] = g.row(int(v))[other[sel]]
    return out


def _frac(x):
    return Fraction(x) if not isinstance(x, Fraction) else x


DEFAULT_CONSTANTS = {"kappa0": 0, "E": 1, "xi": 0, "lam": 1, "theta_bbfs": 0, "theta_hull": 0, "alpha": 0}


@dataclass(frozen=True)
class Automorphism:
    """A symmetry of an instance: a permutation of domains, an isomorphism
    of X, and for every domain V an isomorphism C(V) -> C(g V), all given on
    vertex indices."""

    domains: dict
    x_map: np.ndarray
    factor_maps: dict

    def point(self, h, x):
        return h.X.vertices[int(self.x_map[h.X.idx(x)])]

    def points(self, h, F):
        return {self.point(h, x) for x in F}


@dataclass
class HHSInstance:
    X: MetricGraph
    domains: tuple
    nest: frozenset  # strict pairs (U, V) with U properly nested in V
    orth: frozenset  # ordered pairs, symmetric
    factors: dict
    pi: dict  # V -> int array over X indices, values are factor vertex indices
    rho: dict  # (U, V) -> factor V vertex index, for U properly nested in V or U transverse to V
    rho_map: dict  # (W, V) with V properly nested in W -> int array over C(W) indices
    constants: dict = field(default_factory=dict)
    colors: dict = field(default_factory=dict)
    automorphism: Automorphism | None = None
    name: str = "hhs"

    def __post_init__(self):
        self.domains = tuple(self.domains)
        if len(set(self.domains)) != len(self.domains):
            raise InputError("duplicate domain names")
        known = set(self.domains)
        for U, V in itertools.chain(self.nest, self.orth):
            if U not in known or V not in known:
                raise InputError(f"relation mentions unknown domain ({U!r}, {V!r})")
        self.nest = frozenset(self.nest)
        self.orth = frozenset(self.orth) | frozenset((b, a) for a, b in self.orth)
        consts = dict(DEFAULT_CONSTANTS)
        consts.update(self.constants)
        self.constants = {k: _frac(v) for k, v in consts.items()}
        if not self.colors:
            self.colors = {V: i for i, V in enumerate(self.domains)}
        for V in self.domains:
            if V not in self.factors or V not in self.pi:
                raise InputError(f"domain {V!r} lacks a factor graph or projection table")
            p = np.asarray(self.pi[V], dtype=np.int64)
            if p.shape != (self.X.n,) or p.min() < 0 or p.max() >= self.factors[V].n:
                raise InputError(f"projection table of {V!r} has the wrong shape or range")
            self.pi[V] = p
        for (U, V) in self.required_rho_pairs():
            if (U, V) not in self.rho:
                raise InputError(f"missing relative projection of {U!r} into {V!r}")
            r = int(self.rho[(U, V)])
            if not 0 <= r < self.factors[V].n:
                raise InputError(f"relative projection of {U!r} into {V!r} out of range")
            self.rho[(U, V)] = r
        for (V, W) in self.nest:
            m = self.rho_map.get((W, V))
            if m is None:
                raise InputError(f"missing nested map from {W!r} to {V!r}")
            m = np.asarray(m, dtype=np.int64)
            if m.shape != (self.factors[W].n,) or m.min() < 0 or m.max() >= self.factors[V].n:
                raise InputError(f"nested map from {W!r} to {V!r} has the wrong shape or range")
            self.rho_map[(W, V)] = m
        self._pos = {V: i for i, V in enumerate(self.domains)}

    # -- relations ----------------------------------------------------
    def nested(self, U, V):
        return U == V or (U, V) in self.nest

    def properly_nested(self, U, V):
        return (U, V) in self.nest

    def orthogonal(self, U, V):
        return (U, V) in self.orth

    def transverse(self, U, V):
        return U != V and not self.orthogonal(U, V) and not self.nested(U, V) and not self.nested(V, U)

    def relation(self, U, V):
        if U == V:
            return "equal"
        if self.properly_nested(U, V):
            return "nested"
        if self.properly_nested(V, U):
            return "contains"
        if self.orthogonal(U, V):
            return "orthogonal"
        return "transverse"

    def required_rho_pairs(self):
        out = []
        for U in self.domains:
            for V in self.domains:
                if self.properly_nested(U, V) or self.transverse(U, V):
                    out.append((U, V))
        return out

    def maximum(self):
        tops = [V for V in self.domains if not any(self.properly_nested(V, W) for W in self.domains)]
        return tops[0] if len(tops) == 1 else None

    def order_key(self, V):
        return self._pos[V]

    def color_classes(self):
        out = {}
        for V in self.domains:
            out.setdefault(self.colors[V], []).append(V)
        return out

    # -- projections --------------------------------------------------
    def proj(self, V, x):
        """Factor vertex index of pi_V(x)."""
        return int(self.pi[V][self.X.idx(x)])

    def d(self, V, x, y):
        return self.factors[V].dist_idx(self.proj(V, x), self.proj(V, y))

    def d_rho(self, V, x, U):
        """d_V(x, rho^U_V)."""
        return self.factors[V].dist_idx(self.proj(V, x), self.rho[(U, V)])

    def d_rho_rho(self, V, U, W):
        return self.factors[V].dist_idx(self.rho[(U, V)], self.rho[(W, V)])

    @property
    def kappa0(self):
        return self.constants["kappa0"]

    # -- serialisation ------------------------------------------------
    def to_json(self):
        fv = {V: self.factors[V].vertices for V in self.domains}
        out = {
            "name": self.name,
            "X": self.X.to_json(),
            "domains": list(self.domains),
            "nest": sorted([list(p) for p in self.nest]),
            "orth": sorted([list(p) for p in self.orth if self._pos[p[0]] < self._pos[p[1]]]),
            "factors": {V: self.factors[V].to_json() for V in self.domains},
            "pi": {V: [fv[V][i] for i in self.pi[V]] for V in self.domains},
            "rho": sorted([[U, V, fv[V][r]] for (U, V), r in self.rho.items()]),
            "rho_map": sorted([[W, V, [fv[V][i] for i in m]] for (W, V), m in self.rho_map.items()]),
            "constants": {k: str(v) for k, v in sorted(self.constants.items())},
            "colors": dict(sorted(self.colors.items())),
        }
        if isinstance(self.X, ProductGraph):
            out["X_factors"] = [f.to_json() for f in self.X.factors]
        return out

    @classmethod
    def from_json(cls, data):
        try:
            if "X_factors" in data:
                X = ProductGraph([MetricGraph.from_json(f) for f in data["X_factors"]])
            else:
                X = MetricGraph.from_json(data["X"])
            domains = list(data["domains"])
            factors = {V: MetricGraph.from_json(data["factors"][V]) for V in domains}

            def vidx(V, v):
                return factors[V].idx(_tuplify(v))

            pi = {V: [vidx(V, v) for v in data["pi"][V]] for V in domains}
            rho = {(U, V): vidx(V, v) for U, V, v in data["rho"]}
            rho_map = {(W, V): [vidx(V, v) for v in vals] for W, V, vals in data["rho_map"]}
            return cls(
                X=X, domains=domains, nest=frozenset(tuple(p) for p in data["nest"]),
                orth=frozenset(tuple(p) for p in data["orth"]), factors=factors, pi=pi, rho=rho,
                rho_map=rho_map, constants={k: Fraction(v) for k, v in data.get("constants", {}).items()},
                colors=dict(data.get("colors", {})), name=data.get("name", "hhs"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"bad instance JSON: {exc}") from None


def _tuplify(v):
    return tuple(_tuplify(x) for x in v) if isinstance(v, list) else v


# ---------------------------------------------------------------------
# builders


def trivial_hhs(X, name="trivial"):
    """One domain S with C(S) = X and the identity projection."""
    return HHSInstance(
        X=X, domains=("S",), nest=frozenset(), orth=frozenset(), factors={"S": X},
        pi={"S": np.arange(X.n)}, rho={}, rho_map={}, name=name,
    )


def tree_product_hhs(trees, name="tree-product"):
    """Product of trees: one orthogonal domain per factor, all nested in a
    top domain whose factor graph is a single vertex."""
    trees = list(trees)
    if not 2 <= len(trees) <= 3:
        raise InputError("tree products take two or three factors")
    for t in trees:
        if not t.is_tree():
            raise InputError("every factor must be a tree")
    X = ProductGraph(trees)
    names = [f"V{i + 1}" for i in range(len(trees))]
    point = MetricGraph(["*"], [])
    coords = np.unravel_index(np.arange(X.n), tuple(t.n for t in trees))
    factors = {V: t for V, t in zip(names, trees)}
    factors["S"] = point
    pi = {V: np.asarray(c) for V, c in zip(names, coords)}
    pi["S"] = np.zeros(X.n, dtype=np.int64)
    nest = {(V, "S") for V in names}
    orth = {(a, b) for a in names for b in names if a != b}
    pairs = []
    if len(names) == 3:
        # with three factors, each pair of factor domains needs a container
        # strictly below the top, orthogonal to the remaining factor
        for a, b in itertools.combinations(names, 2):
            P = a + b[1:]
            pairs.append(P)
            (c,) = set(names) - {a, b}
            factors[P] = point
            pi[P] = np.zeros(X.n, dtype=np.int64)
            nest |= {(a, P), (b, P), (P, "S")}
            orth |= {(P, c), (c, P)}
    domains = tuple(names) + tuple(pairs) + ("S",)
    nest, orth = frozenset(nest), frozenset(orth)
    rho, rho_map = {}, {}
    for U, W in nest:
        rho[(U, W)] = 0
        rho_map[(W, U)] = np.zeros(factors[W].n, dtype=np.int64)
    for U, W in itertools.permutations(pairs, 2):
        rho[(U, W)] = 0
    return HHSInstance(
        X=X, domains=domains, nest=nest, orth=orth, factors=factors, pi=pi,
        rho=rho, rho_map=rho_map, constants={"lam": len(trees), "E": 1}, name=name,
    )


def segmented_path_hhs(length, segments, name="segmented-path"):
    """A path 0..length with disjoint marked segments [a, b].  Each segment
    U_i is a domain whose factor is the segment itself (projection clamps);
    the segments are pairwise transverse and nested in a top domain S whose
    factor is the path with every segment collapsed to a point.  The path
    metric is exactly the sum of the domain distances."""
    segs = sorted((int(a), int(b)) for a, b in segments)
    prev = 0
    for a, b in segs:
        if not (prev < a < b < length):
            raise InputError("segments must be disjoint, non-degenerate, separated by a gap, and interior")
        prev = b
    X = MetricGraph(range(length + 1), [(i, i + 1) for i in range(length)])
    xs = np.arange(length + 1)
    collapse = xs.copy()
    for a, b in segs:
        collapse = collapse - np.clip(xs - a, 0, b - a)
    top_len = int(collapse[-1])
    CS = MetricGraph(range(top_len + 1), [(i, i + 1) for i in range(top_len)])
    names = [f"U{i + 1}" for i in range(len(segs))]
    factors = {"S": CS}
    pi = {"S": collapse}
    rho, rho_map = {}, {}
    for V, (a, b) in zip(names, segs):
        factors[V] = MetricGraph(range(a, b + 1), [(i, i + 1) for i in range(a, b)])
        pi[V] = np.clip(xs, a, b) - a
        c = int(collapse[a])
        rho[(V, "S")] = c
        cs = np.arange(top_len + 1)
        rho_map[("S", V)] = np.where(cs > c, b - a, 0)
    for (U, (a1, b1)), (V, (a2, b2)) in itertools.permutations(zip(names, segs), 2):
        rho[(U, V)] = 0 if a1 < a2 else b2 - a2
    colors = {"S": 0}
    colors.update({V: 1 for V in names})
    nest = frozenset((V, "S") for V in names)
    return HHSInstance(
        X=X, domains=("S",) + tuple(names), nest=nest, orth=frozenset(), factors=factors, pi=pi,
        rho=rho, rho_map=rho_map, constants={"E": 1, "lam": 1}, colors=colors, name=name,
    )


def path_reflection(h):
    """Reflection symmetry of a trivial instance on a path 0..L."""
    if h.domains != ("S",):
        raise InputError("reflection is provided for trivial instances only")
    flip = np.arange(h.X.n)[::-1].copy()
    return Automorphism({"S": "S"}, flip, {"S": flip})


# ---------------------------------------------------------------------
# validation


@dataclass
class AxiomCheck:
    passed: bool
    witness: object = None
    measured: object = None


@dataclass
class ValidationReport:
    items: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.items.values())

    def failures(self):
        return sorted(k for k, c in self.items.items() if not c.passed)

    def to_json(self):
        return {
            "passed": self.passed,
            "items": {k: {"passed": c.passed, "witness": _jsonable(c.witness), "measured": _jsonable(c.measured)}
                      for k, c in sorted(self.items.items())},
            "warnings": list(self.warnings),
        }


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in x]
    return x


def validate_instance(h, samples=64, seed=0, strict=False):
    """Check every finitely checkable axiom; sampled where the statement
    quantifies over pairs of points with a search for witnesses."""
    rng = np.random.default_rng(seed)
    rep = ValidationReport()
    k0 = h.kappa0
    _check_projections(h, rep)
    _check_nesting(h, rep)
    _check_orthogonality(h, rep)
    _check_consistency(h, rep, k0)
    chains = _longest_chain(h)
    rep.items["complexity"] = AxiomCheck(True, None, chains)
    _check_large_links(h, rep, rng, samples if not strict else 4 * samples)
    _check_bgi(h, rep, k0)
    _check_partial_realization(h, rep, rng, max(4, samples // 8))
    _check_uniqueness(h, rep, rng, samples)
    _check_colors(h, rep)
    _check_bbfs(h, rep)
    return rep


def _check_projections(h, rep):
    eu, ev = [], []
    for i, s in enumerate(h.X.adj):
        for j in s:
            if i < j:
                eu.append(i)
                ev.append(j)
    eu, ev = np.array(eu, dtype=np.int64), np.array(ev, dtype=np.int64)
    lip, qc, skipped = 0, 0, []
    for V in h.domains:
        g, p = h.factors[V], h.pi[V]
        if eu.size:
            lip = max(lip, int(pair_dist(g, p[eu], p[ev]).max()))
        image = np.unique(p)
        if g.n > 400:
            skipped.append(V)
            continue
        dist_to_image = h.factors[V].multi_source(image)
        t = g.table()
        for a, b in itertools.combinations(image, 2):
            m = (t[a] + t[b]) == t[a, b]
            qc = max(qc, int(dist_to_image[m].max()))
    rep.items["projections"] = AxiomCheck(True, None, {"lipschitz": lip, "quasiconvexity": qc, "qc_skipped": skipped})


def _check_nesting(h, rep):
    bad = None
    for U, V in h.nest:
        if U == V or (V, U) in h.nest:
            bad = ("not antisymmetric", U, V)
    for (U, V), (A, B) in itertools.product(h.nest, h.nest):
        if V == A and U != B and (U, B) not in h.nest:
            bad = ("not transitive", U, V, B)
    top = h.maximum()
    if top is None:
        bad = bad or ("no unique maximal domain",)
    elif any(V != top and not h.properly_nested(V, top) for V in h.domains):
        bad = bad or ("maximal domain does not contain every domain", top)
    rep.items["nesting"] = AxiomCheck(bad is None, bad, top)


def _check_orthogonality(h, rep):
    bad = None
    for U, V in h.orth:
        if U == V:
            bad = ("orthogonality is reflexive at", U)
        if h.nested(U, V) or h.nested(V, U):
            bad = ("orthogonal domains are comparable", U, V)
    for V, W in h.nest:
        for U in h.domains:
            if h.orthogonal(W, U) and not h.orthogonal(V, U):
                bad = ("orthogonality not inherited by nested domain", V, W, U)
    for T in h.domains:
        sub = [V for V in h.domains if h.nested(V, T)]
        for U in sub:
            orth_to_U = [V for V in sub if h.orthogonal(V, U)]
            if not orth_to_U:
                continue
            ok = any(all(h.nested(V, W) for V in orth_to_U) for W in sub if W != T)
            if not ok:
                bad = ("no container for domains orthogonal to", U, "inside", T)
    rep.items["orthogonality"] = AxiomCheck(bad is None, bad)


def _check_consistency(h, rep, k0):
    worst_t, wit_t = 0, None
    worst_n, wit_n = 0, None
    for V, W in itertools.combinations(h.domains, 2):
        if not h.transverse(V, W):
            continue
        dW = h.factors[W].row(h.rho[(V, W)])[h.pi[W]]
        dV = h.factors[V].row(h.rho[(W, V)])[h.pi[V]]
        m = np.minimum(dW, dV)
        i = int(np.argmax(m))
        if m[i] > worst_t:
            worst_t, wit_t = int(m[i]), (V, W, h.X.vertices[i])
    for V, W in sorted(h.nest):
        dW = h.factors[W].row(h.rho[(V, W)])[h.pi[W]]
        dV = pair_dist(h.factors[V], h.pi[V], h.rho_map[(W, V)][h.pi[W]])
        m = np.minimum(dW, dV)
        i = int(np.argmax(m))
        if m[i] > worst_n:
            worst_n, wit_n = int(m[i]), (V, W, h.X.vertices[i])
    rep.items["transverse_consistency"] = AxiomCheck(worst_t <= k0, wit_t if worst_t > k0 else None, worst_t)
    rep.items["nested_consistency"] = AxiomCheck(worst_n <= k0, wit_n if worst_n > k0 else None, worst_n)
    worst, wit = 0, None
    for U, V in itertools.product(h.domains, repeat=2):
        if U == V or not h.properly_nested(U, V):
            continue
        for W in h.domains:
            if W in (U, V):
                continue
            if not (h.properly_nested(V, W) or (h.transverse(V, W) and not h.orthogonal(W, U))):
                continue
            if (U, W) not in h.rho or (V, W) not in h.rho:
                continue
            d = h.d_rho_rho(W, U, V)
            if d > worst:
                worst, wit = d, (U, V, W)
    rep.items["rho_consistency"] = AxiomCheck(worst <= k0, wit if worst > k0 else None, worst)


def _longest_chain(h):
    @functools.lru_cache(maxsize=None)
    def depth(V):
        below = [U for U in h.domains if h.properly_nested(U, V)]
        return 1 + max((depth(U) for U in below), default=0)

    return max(depth(V) for V in h.domains)


def _check_large_links(h, rep, rng, samples):
    lam, E = h.constants["lam"], h.constants["E"]
    bad, worst = None, 0
    for W in h.domains:
        below = [T for T in h.domains if h.properly_nested(T, W)]
        if not below:
            continue
        for _ in range(samples):
            x, y = (h.X.vertices[int(i)] for i in rng.integers(0, h.X.n, size=2))
            N = lam * h.d(W, x, y) + lam
            need = [T for T in below if h.d(T, x, y) >= E]
            if not need:
                continue
            cand = [T for T in below if h.d_rho(W, x, T) <= N]
            cover = _min_cover(h, need, cand, int(N))
            size = len(cover) if cover is not None else None
            if cover is None:
                bad = (W, x, y, need)
            else:
                worst = max(worst, size)
    rep.items["large_links"] = AxiomCheck(bad is None, bad, {"max_cover": worst, "sampled": True})


def _min_cover(h, need, cand, limit):
    for r in range(1, min(limit, len(cand)) + 1):
        for combo in itertools.combinations(cand, r):
            if all(any(h.nested(T, C) for C in combo) for T in need):
                return combo
    return None


def _check_bgi(h, rep, k0):
    """Exact: a violation exists iff two vertices a, b outside the
    kappa0-ball around rho^V_W are joined by a geodesic avoiding that ball
    while their nested images are more than kappa0 apart."""
    from scipy.sparse.csgraph import shortest_path

    bad, worst = None, 0
    for V, W in sorted(h.nest):
        g = h.factors[W]
        if g.n == 1:
            continue
        ball = g.row(h.rho[(V, W)]) <= k0
        outside = np.flatnonzero(~ball)
        if outside.size < 2:
            continue
        if g.n > DENSE_LIMIT:
            rep.warnings.append(f"bounded geodesic image skipped for ({V}, {W}): factor too large")
            continue
        sub = g._csr[outside][:, outside]
        d_sub = shortest_path(sub, directed=False, unweighted=True)
        d_full = g.table()[np.ix_(outside, outside)]
        geodesic_avoids = d_sub == d_full
        img = h.rho_map[(W, V)][outside]
        dv = h.factors[V].table()[np.ix_(img, img)] if h.factors[V].n <= DENSE_LIMIT else \
            np.stack([pair_dist(h.factors[V], np.full(img.size, a), img) for a in img])
        viol = geodesic_avoids & (dv > k0)
        m = int((dv * geodesic_avoids).max())
        worst = max(worst, m)
        if viol.any():
            i, j = np.argwhere(viol)[0]
            bad = (V, W, g.vertices[outside[i]], g.vertices[outside[j]])
    rep.items["bounded_geodesic_image"] = AxiomCheck(bad is None, bad, worst)


def _orthogonal_families(h):
    fams = []
    doms = list(h.domains)
    for r in range(1, len(doms) + 1):
        for combo in itertools.combinations(doms, r):
            if all(h.orthogonal(a, b) for a, b in itertools.combinations(combo, 2)):
                fams.append(combo)
    return fams


def _check_partial_realization(h, rep, rng, samples):
    alpha = 0
    fams = _orthogonal_families(h)
    for fam in fams:
        images = [np.unique(h.pi[V]) for V in fam]
        for _ in range(samples):
            ps = [int(rng.choice(im)) for im in images]
            cost = np.zeros(h.X.n, dtype=np.int64)
            for V, p in zip(fam, ps):
                cost = np.maximum(cost, h.factors[V].row(p)[h.pi[V]])
                for U in h.domains:
                    if h.properly_nested(V, U) or h.transverse(V, U):
                        cost = np.maximum(cost, h.factors[U].row(h.rho[(V, U)])[h.pi[U]])
            alpha = max(alpha, int(cost.min()))
    limit = h.constants["alpha"]
    rep.items["partial_realization"] = AxiomCheck(alpha <= limit, None if alpha <= limit else alpha,
                                                  {"alpha": alpha, "families": len(fams)})


def _check_uniqueness(h, rep, rng, samples):
    n = h.X.n
    xs = rng.integers(0, n, size=samples)
    ys = rng.integers(0, n, size=samples)
    dx = np.array([h.X.dist_idx(int(a), int(b)) for a, b in zip(xs, ys)])
    dmax = np.zeros(samples, dtype=np.int64)
    for V in h.domains:
        dmax = np.maximum(dmax, pair_dist(h.factors[V], h.pi[V][xs], h.pi[V][ys]))
    theta_u = {}
    for kappa in (1, 2, 4, 8):
        small = dmax < kappa
        theta_u[kappa] = int(dx[small].max()) + 1 if small.any() else 0
    rep.items["uniqueness"] = AxiomCheck(True, None, theta_u)


def _check_colors(h, rep):
    bad = None
    for c, members in h.color_classes().items():
        for a, b in itertools.combinations(members, 2):
            if not h.transverse(a, b):
                bad = (c, a, b)
    rep.items["colors"] = AxiomCheck(bad is None, bad)


def _check_bbfs(h, rep):
    theta = h.constants["theta_bbfs"]
    bad4, bad5 = None, None
    for c, members in h.color_classes().items():
        for X_, Y_, Z_ in itertools.permutations(members, 3):
            if h.d_rho_rho(Y_, X_, Z_) > theta and h.rho[(X_, Z_)] != h.rho[(Y_, Z_)]:
                bad4 = (X_, Y_, Z_)
        for Y_, Z_ in itertools.permutations(members, 2):
            far = h.factors[Y_].row(h.rho[(Z_, Y_)])[h.pi[Y_]] > theta
            wrong = h.pi[Z_] != h.rho[(Y_, Z_)]
            hit = np.flatnonzero(far & wrong)
            if hit.size:
                bad5 = (Y_, Z_, h.X.vertices[int(hit[0])])
    rep.items["stable_rho"] = AxiomCheck(True, bad4)
    rep.items["stable_pi"] = AxiomCheck(True, bad5)
    if bad4:
        rep.warnings.append(f"relative projections not stable at {bad4}")
    if bad5:
        rep.warnings.append(f"point projections not stable at {bad5}")


# ---------------------------------------------------------------------
# relevant domains


def _check_K(h, K):
    theta = h.constants["theta_bbfs"]
    if not K > 10 * theta:
        raise ParameterError(f"relevance threshold K={K} must exceed 10 theta = {10 * theta}")


def precedes(h, A, B, x, y, K):
    """A precedes B in the order on Rel_K(x, y); all four characterisations
    are evaluated and must agree."""
    theta = h.constants["theta_bbfs"]
    c1 = h.factors[B].dist_idx(h.proj(B, x), h.rho[(A, B)]) <= theta
    c2 = h.factors[A].dist_idx(h.rho[(B, A)], h.proj(A, y)) <= theta
    c3 = h.factors[B].dist_idx(h.rho[(A, B)], h.proj(B, y)) >= K - theta
    c4 = h.factors[A].dist_idx(h.proj(A, x), h.rho[(B, A)]) >= K - theta
    if len({c1, c2, c3, c4}) != 1:
        raise InstanceError("order characterisations disagree", (A, B, x, y, (c1, c2, c3, c4)))
    return c1


def rel_domains(h, x, y, K):
    """Rel_K(x, y) split by colour, each list sorted by the order."""
    _check_K(h, K)
    out = {}
    for c, members in h.color_classes().items():
        rel = [V for V in members if h.d(V, x, y) > K]
        for a, b in itertools.combinations(rel, 2):
            if precedes(h, a, b, x, y, K) == precedes(h, b, a, x, y, K):
                raise InstanceError("order is not total and antisymmetric", (a, b, x, y))

        def cmp(a, b):
            return -1 if precedes(h, a, b, x, y, K) else 1

        rel.sort(key=functools.cmp_to_key(cmp))
        for i, j in itertools.combinations(range(len(rel)), 2):
            if not precedes(h, rel[i], rel[j], x, y, K):
                raise InstanceError("order is not transitive", (rel[i], rel[j], x, y))
        if rel:
            out[c] = rel
    return out


def rel_pair_set(h, x, y, K):
    return frozenset(V for vs in rel_domains(h, x, y, K).values() for V in vs)


def rel_set(h, F, K):
    """(U(F), {V: U^V(F)}) where U^V(F) = domains of U(F) nested in V."""
    F = list(F)
    if not F:
        raise InputError("F must be nonempty")
    _check_K(h, K)
    U = set()
    for x, y in itertools.combinations(F, 2):
        U |= {V for V in h.domains if h.d(V, x, y) > K}
    U = frozenset(U)
    sub = {V: frozenset(W for W in U if h.nested(W, V)) for V in h.domains}
    return U, sub


def rel_by_color(h, F, K):
    U, _ = rel_set(h, F, K)
    out = {}
    for V in U:
        out.setdefault(h.colors[V], set()).add(V)
    return out


def rel_symmetric_difference(h, F, Fp, K):
    """Per-colour |Rel(F) symmetric-difference Rel(F')| with the bound 8|F|^2."""
    a, b = rel_by_color(h, F, K), rel_by_color(h, Fp, K)
    colors = set(a) | set(b)
    sizes = {c: len(a.get(c, set()) ^ b.get(c, set())) for c in sorted(colors)}
    return sizes, 8 * len(set(F)) ** 2


def hull_mask(h, F, theta):
    F = list(F)
    if not F:
        raise InputError("F must be nonempty")
    ok = np.ones(h.X.n, dtype=bool)
    for V in h.domains:
        g = h.factors[V]
        pts = sorted({h.proj(V, x) for x in F})
        hm = weak_hull_mask(g, [g.vertices[i] for i in pts])
        near = g.multi_source(np.flatnonzero(hm)) <= theta
        ok &= near[h.pi[V]]
    return ok


def hull_theta(h, F, theta):
    m = hull_mask(h, F, theta)
    return frozenset(h.X.vertices[i] for i in np.flatnonzero(m))


def hull_density(h, F, theta):
    """Largest distance from a point of hull(pi_V(F)) to pi_V(H_theta(F))."""
    m = np.flatnonzero(hull_mask(h, F, theta))
    worst = 0
    for V in h.domains:
        g = h.factors[V]
        pts = sorted({h.proj(V, x) for x in F})
        hm = weak_hull_mask(g, [g.vertices[i] for i in pts])
        d = g.multi_source(np.unique(h.pi[V][m]))
        worst = max(worst, int(d[hm].max()))
    return worst


def involved_domains(h, F, Fp, K):
    if hausdorff_distance(h.X, F, Fp) > 1:
        raise PreconditionError("inputs are more than distance one apart", hausdorff_distance(h.X, F, Fp))
    U, sub = rel_set(h, F, K)
    Up, subp = rel_set(h, Fp, K)
    out = set()
    for V in U | Up:
        if {h.proj(V, x) for x in F} != {h.proj(V, x) for x in Fp} or sub[V] != subp[V]:
            out.add(V)
    return frozenset(out)


def distance_formula_ratio(h, s, pairs=None, samples=200, seed=0):
    """Compare d_X with the sum of projection distances truncated below s."""
    if pairs is None:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, h.X.n, size=(samples, 2))
        pairs = [(h.X.vertices[int(a)], h.X.vertices[int(b)]) for a, b in idx]
    rows = []
    for x, y in pairs:
        total = 0
        for V in h.domains:
            d = h.d(V, x, y)
            total += d if d >= s else 0
        rows.append((h.X.dist(x, y), total))
    ratios = [t / d for d, t in rows if d > 0 and t > 0]
    lo = min(ratios, default=1.0)
    hi = max(ratios, default=1.0)
    K = max(hi, 1 / lo if lo > 0 else 1.0)
    C = max((max(d - K * t, t - K * d) for d, t in rows), default=0.0)
    return {"pairs": len(rows), "ratio_min": lo, "ratio_max": hi, "K": K, "C": max(C, 0.0),
            "zero_pairs_consistent": all((d == 0) == (t == 0) for d, t in rows if d < s)}


def calibrate_relevance(h, samples=200, seed=0):
    """Twice the least threshold for which every sampled adjacent triple
    x, y, y' changes each coloured Rel set by at most two domains."""
    rng = np.random.default_rng(seed)
    theta = h.constants["theta_bbfs"]
    X = h.X
    triples = []
    for _ in range(samples):
        x, y = (int(i) for i in rng.integers(0, X.n, size=2))
        nb = X.adj[y]
        yp = int(nb[int(rng.integers(0, len(nb)))]) if nb else y
        triples.append((X.vertices[x], X.vertices[y], X.vertices[yp]))
    dists = {V: [(h.d(V, x, y), h.d(V, x, yp)) for x, y, yp in triples] for V in h.domains}
    cands = sorted({int(10 * theta) + 1} | {a for v in dists.values() for p in v for a in p if a > 10 * theta})
    for K in cands:
        ok = True
        for t in range(len(triples)):
            diff = {}
            for V in h.domains:
                a, b = dists[V][t]
                if (a > K) != (b > K):
                    diff[h.colors[V]] = diff.get(h.colors[V], 0) + 1
            if any(v > 2 for v in diff.values()):
                ok = False
                break
        if ok:
            return max(2 * K, 1)
    return max(2 * cands[-1], 1)
