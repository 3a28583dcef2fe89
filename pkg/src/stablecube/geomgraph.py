"""Unit-edge metric graphs: distances, geodesics, hulls, four-point delta and
exact minimal networks (Steiner trees spanning families of vertex sets).

Vertices are arbitrary sortable identifiers (ints, or tuples of ints for grids
and products).  Internally every vertex has an index given by its position in
the sorted vertex list, and "lexicographic" tie-breaking always means
comparison of these indices.
"""

from __future__ import annotations

import itertools
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra, shortest_path

from .errors import InputError, InvariantViolation, ResourceError

DENSE_LIMIT = 1500  # all-pairs table is precomputed up to this many vertices
ROW_CACHE = 256
UNREACHED = np.iinfo(np.int32).max // 4


def _as_vertex(v):
    return tuple(_as_vertex(x) for x in v) if isinstance(v, list) else v


class MetricGraph:
    """Finite connected graph with unit edge lengths and exact distances."""

    def __init__(self, vertices, edges, name=None):
        verts = sorted(set(vertices))
        if not verts:
            raise InputError("graph needs at least one vertex")
        self.vertices = tuple(verts)
        self.index = {v: i for i, v in enumerate(verts)}
        self.n = len(verts)
        self.name = name
        nbrs = [set() for _ in verts]
        for u, v in edges:
            if u not in self.index or v not in self.index:
                raise InputError(f"edge ({u!r}, {v!r}) uses an unknown vertex")
            i, j = self.index[u], self.index[v]
            if i == j:
                raise InputError(f"self-loop at {u!r}")
            nbrs[i].add(j)
            nbrs[j].add(i)
        self.adj = tuple(tuple(sorted(s)) for s in nbrs)
        rows, cols = [], []
        for i, s in enumerate(self.adj):
            rows.extend([i] * len(s))
            cols.extend(s)
        self._csr = csr_matrix(
            (np.ones(len(rows), dtype=np.float64), (rows, cols)), shape=(self.n, self.n)
        )
        ncomp, _ = connected_components(self._csr, directed=False)
        if ncomp != 1:
            raise InputError(f"graph is disconnected ({ncomp} components)")
        self._table = None
        self._rows = OrderedDict()

    # -- basic access -------------------------------------------------
    def idx(self, v):
        try:
            return self.index[v]
        except (KeyError, TypeError):
            raise InputError(f"unknown vertex {v!r}") from None

    def has(self, v):
        try:
            return v in self.index
        except TypeError:
            return False

    def edge_list(self):
        vs = self.vertices
        return [(vs[i], vs[j]) for i, s in enumerate(self.adj) for j in s if i < j]

    def num_edges(self):
        return sum(len(s) for s in self.adj) // 2

    def neighbors(self, v):
        return [self.vertices[j] for j in self.adj[self.idx(v)]]

    def is_tree(self):
        return self.num_edges() == self.n - 1

    # -- distances ----------------------------------------------------
    def table(self):
        if self._table is None:
            if self.n > DENSE_LIMIT:
                raise ResourceError(f"dense distance table refused for {self.n} vertices")
            t = shortest_path(self._csr, directed=False, unweighted=True)
            self._table = t.astype(np.int32)
        return self._table

    def row(self, i):
        """Distances from vertex index `i` to every vertex index."""
        if self.n <= DENSE_LIMIT:
            return self.table()[i]
        r = self._rows.get(i)
        if r is None:
            r = shortest_path(self._csr, directed=False, unweighted=True, indices=i)
            r = r.astype(np.int32)
            self._rows[i] = r
            if len(self._rows) > ROW_CACHE:
                self._rows.popitem(last=False)
        else:
            self._rows.move_to_end(i)
        return r

    def dist(self, u, v):
        return int(self.row(self.idx(u))[self.idx(v)])

    def dist_idx(self, i, j):
        return int(self.row(i)[j])

    def multi_source(self, idxs, offsets=None):
        """min over sources s of (offset[s] + d(s, v)), as an int array.

        Implemented as one Dijkstra run from an auxiliary super-source whose
        edge weights encode the offsets (shifted by one because sparse
        matrices cannot store zero weights).
        """
        idxs = np.asarray(list(idxs), dtype=np.int64)
        if idxs.size == 0:
            return np.full(self.n, UNREACHED, dtype=np.int64)
        if offsets is None:
            if idxs.size == 1:
                return self.row(int(idxs[0])).astype(np.int64)
            offsets = np.zeros(idxs.size, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=np.int64)
        keep = offsets < UNREACHED
        idxs, offsets = idxs[keep], offsets[keep]
        if idxs.size == 0:
            return np.full(self.n, UNREACHED, dtype=np.int64)
        n = self.n
        base = self._csr.tocoo()
        r = np.concatenate([base.row, np.full(idxs.size, n)])
        c = np.concatenate([base.col, idxs])
        w = np.concatenate([base.data, offsets.astype(np.float64) + 1.0])
        m = csr_matrix((w, (r, c)), shape=(n + 1, n + 1))
        d = dijkstra(m, directed=True, indices=n)[:n]
        out = np.where(np.isinf(d), UNREACHED, d - 1.0)
        return out.astype(np.int64)

    # -- geodesics ----------------------------------------------------
    def geodesic_idx(self, i, j):
        """Lexicographically least shortest path from index i to index j."""
        rj = self.row(j)
        path = [i]
        cur = i
        while cur != j:
            want = rj[cur] - 1
            cur = next(w for w in self.adj[cur] if rj[w] == want)
            path.append(cur)
        return path

    def interval_mask(self, i, j):
        """Boolean mask of vertices on some geodesic from i to j."""
        ri, rj = self.row(i), self.row(j)
        return (ri + rj) == ri[j]

    # -- serialisation ------------------------------------------------
    def to_json(self):
        return {"vertices": list(self.vertices), "edges": [list(e) for e in self.edge_list()]}

    @classmethod
    def from_json(cls, data):
        try:
            verts = [_as_vertex(v) for v in data["vertices"]]
            edges = [(_as_vertex(u), _as_vertex(v)) for u, v in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad graph JSON: {exc}") from None
        return cls(verts, edges)

    def to_dot(self, highlight=()):
        hl = set(highlight)
        lines = ["graph G {"]
        for v in self.vertices:
            attr = ' [style=filled fillcolor="#f4a261"]' if v in hl else ""
            lines.append(f'  "{v}"{attr};')
        for u, v in self.edge_list():
            lines.append(f'  "{u}" -- "{v}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"MetricGraph(n={self.n}, m={self.num_edges()})"


class ProductGraph(MetricGraph):
    """Cartesian product of graphs; distances are sums of factor distances,
    so no table over the (possibly large) product is ever formed."""

    def __init__(self, factors, name=None):
        self.factors = tuple(factors)
        verts = list(itertools.product(*(f.vertices for f in self.factors)))
        edges = []
        for v in verts:
            for k, f in enumerate(self.factors):
                for w in f.neighbors(v[k]):
                    if f.index[w] > f.index[v[k]]:
                        edges.append((v, v[:k] + (w,) + v[k + 1:]))
        super().__init__(verts, edges, name=name)
        self._shape = tuple(f.n for f in self.factors)

    def row(self, i):
        coords = np.unravel_index(i, self._shape)
        total = np.zeros(self._shape, dtype=np.int32)
        for k, f in enumerate(self.factors):
            shape = [1] * len(self._shape)
            shape[k] = f.n
            total = total + f.row(int(coords[k])).reshape(shape)
        return total.reshape(-1)

    def dist(self, u, v):
        return sum(f.dist(a, b) for f, a, b in zip(self.factors, u, v))


# ---------------------------------------------------------------------
# simple families


def path_graph(length):
    """Path 0 - 1 - ... - length."""
    return MetricGraph(range(length + 1), [(i, i + 1) for i in range(length)], name=f"path{length}")


def cycle_graph(n):
    return MetricGraph(range(n), [(i, (i + 1) % n) for i in range(n)], name=f"cycle{n}")


def star_graph(legs, leg_length):
    """Center 0 with `legs` paths of `leg_length` edges; leg j has vertices
    1 + j*leg_length ... (j+1)*leg_length, ordered outward."""
    edges = []
    for j in range(legs):
        prev = 0
        for t in range(leg_length):
            v = 1 + j * leg_length + t
            edges.append((prev, v))
            prev = v
    return MetricGraph(range(1 + legs * leg_length), edges, name=f"star{legs}x{leg_length}")


def grid_graph(w, h):
    verts = [(x, y) for x in range(w + 1) for y in range(h + 1)]
    edges = [((x, y), (x + 1, y)) for x in range(w) for y in range(h + 1)]
    edges += [((x, y), (x, y + 1)) for x in range(w + 1) for y in range(h)]
    return MetricGraph(verts, edges, name=f"grid{w}x{h}")


# ---------------------------------------------------------------------
# operations


def graph_distance(g, u, v):
    return g.dist(u, v)


def canonical_geodesic(g, u, v):
    return [g.vertices[i] for i in g.geodesic_idx(g.idx(u), g.idx(v))]


def weak_hull_mask(g, F):
    idxs = sorted({g.idx(x) for x in F})
    if not idxs:
        raise InputError("weak hull of an empty set")
    mask = np.zeros(g.n, dtype=bool)
    mask[idxs] = True
    for a, b in itertools.combinations(idxs, 2):
        mask |= g.interval_mask(a, b)
    return mask


def weak_hull(g, F):
    """Union of all geodesics between pairs of F."""
    mask = weak_hull_mask(g, F)
    return frozenset(g.vertices[i] for i in np.flatnonzero(mask))


def set_distance_row(g, A):
    return g.multi_source([g.idx(a) for a in A])


def neighborhood(g, A, r):
    row = set_distance_row(g, A)
    return frozenset(g.vertices[i] for i in np.flatnonzero(row <= r))


def hausdorff_distance(g, A, B):
    A, B = list(A), list(B)
    if not A or not B:
        return 0 if not A and not B else float("inf")
    ra, rb = set_distance_row(g, A), set_distance_row(g, B)
    return int(max(max(rb[g.idx(a)] for a in A), max(ra[g.idx(b)] for b in B)))


def delta_estimate(g, max_vertices=120):
    """Smallest delta satisfying the four-point condition over all quadruples.

    Convention: for each quadruple take the three pair-sums, and delta is half
    the gap between the largest and the middle one.  Trees short-circuit to 0.
    """
    if g.is_tree():
        return Fraction(0)
    if g.n > max_vertices:
        raise ResourceError(f"four-point scan refused for {g.n} vertices")
    D = g.table().astype(np.int64)
    best = 0
    for x in range(g.n):
        dx = D[x]
        s1 = dx[:, None, None] + D[None, :, :]
        s2 = dx[None, :, None] + D[:, None, :]
        s3 = dx[None, None, :] + D[:, :, None]
        hi = np.maximum(np.maximum(s1, s2), s3)
        lo = np.minimum(np.minimum(s1, s2), s3)
        gap = hi - (s1 + s2 + s3 - hi - lo)
        best = max(best, int(gap.max()))
    return Fraction(best, 2)


def delta_sampled(g, samples=20000, seed=0):
    """Lower bound for delta from random quadruples (for graphs too large
    for the exhaustive scan)."""
    if g.is_tree():
        return Fraction(0)
    rng = np.random.default_rng(seed)
    best = 0
    for _ in range(samples):
        x, y, z, w = (int(t) for t in rng.integers(0, g.n, size=4))
        rx, ry = g.row(x), g.row(y)
        s = sorted((rx[y] + g.row(z)[w], rx[z] + ry[w], rx[w] + ry[z]))
        best = max(best, int(s[2] - s[1]))
    return Fraction(best, 2)


# ---------------------------------------------------------------------
# minimal networks


@dataclass(frozen=True)
class EmbeddedNetwork:
    vertices: frozenset
    edges: tuple  # sorted pairs of vertices, each pair sorted by index
    terminals: tuple  # tuple of frozensets
    approximate: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def total_length(self):
        return len(self.edges)

    def collapsed_is_tree(self):
        """True when contracting each terminal set yields a tree (or a
        single point, when nothing needs connecting)."""
        label = {}
        for t, T in enumerate(self.terminals):
            for v in T:
                label.setdefault(v, ("t", t))
        nodes = {label.get(v, ("v", v)) for v in self.vertices}
        nodes |= {("t", t) for t in range(len(self.terminals))}
        parent = {x: x for x in nodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        # overlapping terminal sets are already joined
        for v, lab in label.items():
            for t, T in enumerate(self.terminals):
                if v in T and ("t", t) != lab:
                    parent[find(("t", t))] = find(lab)
        for u, v in self.edges:
            a, b = find(label.get(u, ("v", u))), find(label.get(v, ("v", v)))
            if a == b:
                return False
            parent[a] = b
        return len({find(x) for x in nodes}) == 1


def _submasks_with_low(S):
    low = S & -S
    A = (S - 1) & S
    out = []
    while A:
        if A & low:
            out.append(A)
        A = (A - 1) & S
    return sorted(out)


def steiner_network(g, terminals, exact_limit=8):
    """Minimal network meeting every terminal set.

    Terminal sets are contracted to super-terminals; up to `exact_limit` sets
    the Dreyfus-Wagner recursion is solved exactly, above it a metric-closure
    spanning tree is returned and flagged approximate.  Every tie is broken by
    vertex index so the output depends on the input only.
    """
    terminals = [frozenset(T) for T in terminals]
    if not terminals:
        raise InputError("steiner_network needs at least one terminal set")
    if any(not T for T in terminals):
        raise InputError("empty terminal set")
    term_idx = [np.array(sorted(g.idx(v) for v in T), dtype=np.int64) for T in terminals]
    k = len(terminals)
    if k == 1:
        verts = terminals[0] if len(terminals[0]) == 1 else frozenset()
        return EmbeddedNetwork(verts, (), tuple(terminals))
    if k <= exact_limit:
        edge_idx = _dreyfus_wagner(g, term_idx)
        approx = False
    else:
        edge_idx = _closure_tree(g, term_idx)
        approx = True
    return _finish(g, edge_idx, terminals, approx)


def _finish(g, edge_idx, terminals, approx):
    vs = g.vertices
    pairs = sorted({(min(a, b), max(a, b)) for a, b in edge_idx})
    verts = frozenset(vs[i] for p in pairs for i in p)
    net = EmbeddedNetwork(verts, tuple((vs[a], vs[b]) for a, b in pairs), tuple(terminals), approx)
    if not net.collapsed_is_tree():
        raise InvariantViolation("minimal network is not a tree after collapsing terminals", pairs)
    return net


def _dreyfus_wagner(g, term_idx):
    k = len(term_idx)
    full = (1 << k) - 1
    dp = {}
    merged = {}
    split = {}
    for i, T in enumerate(term_idx):
        dp[1 << i] = g.multi_source(T)
    masks = sorted(range(1, full + 1), key=lambda m: (bin(m).count("1"), m))
    for S in masks:
        if S & (S - 1) == 0:
            continue
        best = np.full(g.n, UNREACHED * 2, dtype=np.int64)
        choice = np.zeros(g.n, dtype=np.int64)
        for A in _submasks_with_low(S):
            cand = dp[A] + dp[S ^ A]
            better = cand < best
            best[better] = cand[better]
            choice[better] = A
        merged[S], split[S] = best, choice
        dp[S] = g.multi_source(np.arange(g.n), best)
    root = int(np.argmin(dp[full]))
    edges = []
    stack = [(full, root)]
    while stack:
        S, v = stack.pop()
        val = dp[S][v]
        if S & (S - 1) == 0:
            if val == 0:
                continue
            u = next(w for w in g.adj[v] if dp[S][w] == val - 1)
            edges.append((v, u))
            stack.append((S, u))
        elif merged[S][v] == val:
            A = int(split[S][v])
            stack.append((A, v))
            stack.append((S ^ A, v))
        else:
            u = next(w for w in g.adj[v] if dp[S][w] == val - 1)
            edges.append((v, u))
            stack.append((S, u))
    return _reduce_to_tree(edges, term_idx)


def _closure_tree(g, term_idx):
    k = len(term_idx)
    rows = [g.multi_source(T) for T in term_idx]
    closure = [[int(rows[i][term_idx[j]].min()) for j in range(k)] for i in range(k)]
    in_tree = {0}
    chosen = []
    while len(in_tree) < k:
        d, i, j = min((closure[i][j], i, j) for i in in_tree for j in range(k) if j not in in_tree)
        chosen.append((i, j))
        in_tree.add(j)
    edges = []
    for i, j in chosen:
        rj = rows[i][term_idx[j]]
        b = int(term_idx[j][int(np.argmin(rj))])
        cur = b
        while rows[i][cur] > 0:
            nxt = next(w for w in g.adj[cur] if rows[i][w] == rows[i][cur] - 1)
            edges.append((cur, nxt))
            cur = nxt
    return _reduce_to_tree(edges, term_idx)


def _reduce_to_tree(edges, term_idx):
    """Drop edges closing cycles once each terminal set is contracted, then
    prune dangling non-terminal ends.  Exact solutions can contain such
    cycles when two tied branches reach one terminal set at different
    vertices."""
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    term_of = {}
    for t, T in enumerate(term_idx):
        for v in T:
            term_of.setdefault(int(v), t)
            parent[find(int(v))] = find(("t", t))
    kept = []
    for a, b in sorted({(min(a, b), max(a, b)) for a, b in edges}):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            kept.append((a, b))
    changed = True
    while changed:
        changed = False
        deg = {}
        for a, b in kept:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        leaves = {v for v, d in deg.items() if d == 1 and v not in term_of}
        if leaves:
            kept = [(a, b) for a, b in kept if a not in leaves and b not in leaves]
            changed = True
    return kept
