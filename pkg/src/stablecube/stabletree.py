"""Stable trees for a finite set F (plus auxiliary points Y) in a hyperbolic
graph: clusters, the separation graph between clusters, shadows, the
assembled tree made of per-cluster pieces and inter-cluster networks, and
the correspondence between the trees of two nearby inputs.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import InputError, InvariantViolation, ParameterError, PreconditionError, ResourceError
from .geomgraph import (
    delta_estimate,
    delta_sampled,
    hausdorff_distance,
    set_distance_row,
    steiner_network,
    weak_hull_mask,
)


# ---------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class StableTreeParams:
    """Unset fields are derived: eps = ceil(4 delta + 4), eps' = 2 eps,
    E = 8 eps'.  delta itself is measured from the graph when not given."""

    delta: Fraction | None = None
    eps: int | None = None
    eps_prime: int | None = None
    E: int | None = None
    exact_limit: int = 8

    def resolve(self, g):
        source = "given"
        delta = self.delta
        if delta is None:
            try:
                delta, source = delta_estimate(g), "exact"
            except ResourceError:
                delta, source = delta_sampled(g), "sampled"
        eps = self.eps if self.eps is not None else math.ceil(4 * Fraction(delta) + 4)
        eps_prime = self.eps_prime if self.eps_prime is not None else 2 * eps
        E = self.E if self.E is not None else 8 * eps_prime
        return ResolvedParams(Fraction(delta), source, int(eps), int(eps_prime), int(E), self.exact_limit)


@dataclass(frozen=True)
class ResolvedParams:
    delta: Fraction
    delta_source: str
    eps: int
    eps_prime: int
    E: int
    exact_limit: int

    def to_json(self):
        return {"delta": str(self.delta), "delta_source": self.delta_source, "eps": self.eps,
                "eps_prime": self.eps_prime, "E": self.E, "exact_limit": self.exact_limit}


# ---------------------------------------------------------------------
# clusters and separation


@dataclass(frozen=True)
class ClusterGraph:
    points: tuple
    E: int
    clusters: tuple  # frozensets, ordered by their least vertex index
    adjacency: tuple  # pairs of points at distance <= E
    warnings: tuple = ()

    def cluster_of(self, v):
        for c, C in enumerate(self.clusters):
            if v in C:
                return c
        raise KeyError(v)


def build_clusters(g, F, Y, E, eps=None):
    F, Y = frozenset(F), frozenset(Y)
    if not F:
        raise InputError("F must be nonempty")
    if E <= 0:
        raise ParameterError("E must be positive")
    pts = sorted(F | Y, key=g.idx)
    warnings = []
    if eps is not None and Y - F:
        hull = weak_hull_mask(g, F)
        dist = g.multi_source(np.flatnonzero(hull))
        far = [y for y in sorted(Y, key=g.idx) if 2 * dist[g.idx(y)] > eps]
        if far:
            warnings.append(f"{len(far)} points of Y lie beyond eps/2 of hull(F), e.g. {far[0]!r}")
    parent = list(range(len(pts)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    ids = [g.idx(p) for p in pts]
    adjacency = []
    for a in range(len(pts)):
        row = g.row(ids[a])
        for b in range(a + 1, len(pts)):
            if row[ids[b]] <= E:
                adjacency.append((pts[a], pts[b]))
                parent[find(a)] = find(b)
    groups = {}
    for a, p in enumerate(pts):
        groups.setdefault(find(a), []).append(p)
    clusters = sorted((frozenset(v) for v in groups.values()), key=lambda C: min(g.idx(x) for x in C))
    return ClusterGraph(tuple(pts), E, tuple(clusters), tuple(adjacency), tuple(warnings))


@dataclass(frozen=True)
class SeparationGraph:
    nodes: tuple
    edges: frozenset
    e0: frozenset
    connected: bool
    separators: dict = field(default_factory=dict, compare=False)  # (i, j) -> separating clusters

    def neighbors(self, i):
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def valence(self, i):
        return len(self.neighbors(i))

    @property
    def tags(self):
        return tuple("E0" if i in self.e0 else "other" for i in self.nodes)


def _closest_interval_mask(g, C1, C2):
    idx1 = [g.idx(x) for x in C1]
    idx2 = [g.idx(x) for x in C2]
    best, pairs = None, []
    for a in idx1:
        row = g.row(a)
        for b in idx2:
            d = int(row[b])
            if best is None or d < best:
                best, pairs = d, [(a, b)]
            elif d == best:
                pairs.append((a, b))
    mask = np.zeros(g.n, dtype=bool)
    for a, b in pairs:
        mask |= g.interval_mask(a, b)
    return mask


def separates(g, C1, C2, C3, radius):
    """Does C2 come within `radius` of some minimal geodesic between a
    closest pair of C1 and C3?"""
    mask = _closest_interval_mask(g, C1, C3)
    r2 = set_distance_row(g, C2)
    return bool((r2[mask] <= radius).any())


def separation_graph(g, cg, eps_prime, F):
    if cg.E <= 4 * eps_prime:
        raise ParameterError(f"need E > 4 eps' (E={cg.E}, eps'={eps_prime})")
    F = frozenset(F)
    cl = cg.clusters
    c = len(cl)
    rows = [set_distance_row(g, C) for C in cl]
    edges, seps = set(), {}
    for i, j in itertools.combinations(range(c), 2):
        mask = _closest_interval_mask(g, cl[i], cl[j])
        between = [m for m in range(c) if m not in (i, j) and (rows[m][mask] <= 2 * eps_prime).any()]
        seps[(i, j)] = tuple(between)
        if not between:
            edges.add((i, j))
    deg = {i: 0 for i in range(c)}
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    e0 = frozenset(i for i in range(c) if deg[i] == 2 and not (cl[i] & F))
    seen, queue = {0}, deque([0])
    while queue:
        a = queue.popleft()
        for x, y in edges:
            for u, w in ((x, y), (y, x)):
                if u == a and w not in seen:
                    seen.add(w)
                    queue.append(w)
    return SeparationGraph(tuple(range(c)), frozenset(edges), e0, len(seen) == c, seps)


def edge_components(sg):
    """Closures of the pieces of the separation graph with the E0 clusters
    removed: each non-E0 component together with its E0 neighbours, plus
    every edge joining two E0 clusters."""
    out = []
    seen = set()
    for start in sg.nodes:
        if start in sg.e0 or start in seen:
            continue
        comp, queue = {start}, deque([start])
        seen.add(start)
        while queue:
            a = queue.popleft()
            for b in sg.neighbors(a):
                if b not in sg.e0 and b not in seen:
                    seen.add(b)
                    comp.add(b)
                    queue.append(b)
        closure = set(comp)
        for a in comp:
            closure.update(b for b in sg.neighbors(a) if b in sg.e0)
        out.append(tuple(sorted(closure)))
    for a, b in sorted(sg.edges):
        if a in sg.e0 and b in sg.e0:
            out.append((a, b))
    return sorted(out)


# ---------------------------------------------------------------------
# shadows


def _network_adjacency(net):
    adj = {v: set() for v in net.vertices}
    for u, v in net.edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def _tree_hull(adj, marked, key):
    """Convex hull of `marked` inside a tree given by adjacency sets."""
    marked = set(marked)
    if len(marked) <= 1:
        return frozenset(marked)
    # repeatedly strip leaves that are not marked
    deg = {v: len(adj[v]) for v in adj}
    alive = set(adj)
    queue = deque(sorted((v for v in alive if deg[v] <= 1 and v not in marked), key=key))
    while queue:
        v = queue.popleft()
        if v not in alive:
            continue
        alive.discard(v)
        for w in adj[v]:
            if w in alive:
                deg[w] -= 1
                if deg[w] <= 1 and w not in marked:
                    queue.append(w)
    return frozenset(alive)


def shadow(g, lambdaF, A, eps):
    """Convex hull inside the tree lambda(F) of its vertices within eps of A."""
    A = list(A)
    if not A or not lambdaF.vertices:
        return frozenset()
    row = set_distance_row(g, A)
    close = [v for v in lambdaF.vertices if row[g.idx(v)] <= eps]
    if not close:
        return frozenset()
    adj = _network_adjacency(lambdaF)
    if not adj:
        return frozenset(close)
    # restrict to the component containing the close vertices (lambda(F) is a tree)
    return _tree_hull(adj, close, g.idx)


# ---------------------------------------------------------------------
# the stable tree


@dataclass
class StableTree:
    g: object
    F: frozenset
    Y: frozenset
    params: ResolvedParams
    xi: tuple  # node -> graph vertex
    adj: tuple  # node -> sorted neighbour nodes
    edge_tag: dict  # (a, b) with a < b -> ("c", cluster) or ("e", component)
    clusters: tuple
    cluster_nodes: dict  # cluster id -> frozenset of nodes (a T_c component)
    te_components: tuple  # (cluster ids of V0, frozenset of nodes)
    separation: SeparationGraph
    cluster_graph: ClusterGraph
    is_tree: bool
    approximate: bool = False
    warnings: tuple = ()

    @property
    def size(self):
        return len(self.xi)

    def edges(self):
        return sorted(self.edge_tag)

    def degree(self, a):
        return len(self.adj[a])

    def leaves(self):
        if self.size == 1:
            return [0]
        return [a for a in range(self.size) if len(self.adj[a]) <= 1]

    def branching(self):
        return sum(len(s) - 2 for s in self.adj if len(s) > 2)

    def tc_nodes(self):
        out = set()
        for s in self.cluster_nodes.values():
            out |= s
        return out

    def te_nodes(self):
        out = set()
        for (a, b), tag in self.edge_tag.items():
            if tag[0] == "e":
                out.update((a, b))
        return out

    def node_key(self, a):
        return (self.g.idx(self.xi[a]), a)

    def te_segments(self):
        """Edges of the forest T_e: maximal node paths made of T_e unit edges
        whose interior nodes have degree two and are not in T_c."""
        tc = self.tc_nodes()
        is_e = {k for k, t in self.edge_tag.items() if t[0] == "e"}

        def breaking(a):
            return len(self.adj[a]) != 2 or a in tc

        segs, used = [], set()
        for a in range(self.size):
            if not breaking(a):
                continue
            for b in self.adj[a]:
                e = (min(a, b), max(a, b))
                if e not in is_e or e in used:
                    continue
                path = [a, b]
                used.add(e)
                while not breaking(path[-1]):
                    nxt = next(w for w in self.adj[path[-1]] if w != path[-2])
                    used.add((min(path[-1], nxt), max(path[-1], nxt)))
                    path.append(nxt)
                if self.node_key(path[-1]) < self.node_key(path[0]):
                    path.reverse()
                segs.append(tuple(path))
        # a T_e cycle with no breaking node cannot occur in a tree
        return sorted(set(segs), key=lambda p: (self.node_key(p[0]), self.node_key(p[-1]), p))

    def csr(self):
        r, c = [], []
        for a, s in enumerate(self.adj):
            r.extend([a] * len(s))
            c.extend(s)
        return csr_matrix((np.ones(len(r)), (r, c)), shape=(self.size, self.size))

    def tree_rows(self, sources):
        d = shortest_path(self.csr(), directed=False, unweighted=True, indices=list(sources))
        return np.where(np.isinf(d), -1, d).astype(np.int64)

    def to_json(self):
        return {
            "nodes": [{"id": a, "vertex": self.xi[a]} for a in range(self.size)],
            "edges": [{"u": a, "v": b, "forest": t[0], "piece": t[1]} for (a, b), t in sorted(self.edge_tag.items())],
            "clusters": [sorted(C, key=self.g.idx) for C in self.clusters],
            "params": self.params.to_json(),
            "branching": self.branching(),
            "is_tree": self.is_tree,
            "approximate": self.approximate,
        }

    def to_dot(self):
        lines = ["graph T {"]
        for a in range(self.size):
            lines.append(f'  n{a} [label="{self.xi[a]}"];')
        for (a, b), t in sorted(self.edge_tag.items()):
            color = "#d62828" if t[0] == "c" else "#1d3557"
            lines.append(f'  n{a} -- n{b} [color="{color}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_stable_tree(g, F, Y=(), params=None):
    F = frozenset(F)
    Y = frozenset(Y)
    if not F:
        raise InputError("F must be nonempty")
    for v in F | Y:
        g.idx(v)
    rp = (params or StableTreeParams()).resolve(g)
    cg = build_clusters(g, F, Y, rp.E, eps=rp.eps)
    sg = separation_graph(g, cg, rp.eps_prime, F)
    if not sg.connected:
        raise InvariantViolation("separation graph is disconnected", sorted(sg.edges))
    comps = edge_components(sg) if len(cg.clusters) > 1 else [(0,)]
    approx = False
    networks = []
    for V0 in comps:
        terms = [cg.clusters[c] for c in V0]
        net = steiner_network(g, terms, rp.exact_limit) if len(terms) > 1 else None
        approx |= bool(net and net.approximate)
        networks.append(net)
    te_vertices = set()
    for net in networks:
        if net is not None:
            te_vertices |= net.vertices
    mus = []
    for C in cg.clusters:
        r = sorted((C & te_vertices) | (C & F), key=g.idx)
        if not r:
            r = [min(C, key=g.idx)]
        mu = steiner_network(g, [frozenset([x]) for x in r], rp.exact_limit)
        approx |= mu.approximate
        mus.append((r, mu))

    keys = {}
    order = []

    def node(key):
        if key not in keys:
            keys[key] = None
            order.append(key)
        return key

    cluster_id = {}
    for c, C in enumerate(cg.clusters):
        for x in C:
            cluster_id[x] = c
    edge_list = []
    for c, (r, mu) in enumerate(mus):
        verts = set(mu.vertices) | set(r)
        for x in verts:
            node(("c", c, x))
        for u, v in mu.edges:
            edge_list.append((("c", c, u), ("c", c, v), ("c", c)))
    for k, (V0, net) in enumerate(zip(comps, networks)):
        if net is None:
            continue
        members = set(V0)

        def key(x):
            c = cluster_id.get(x)
            return ("c", c, x) if c in members else ("e", k, x)

        for x in net.vertices:
            node(key(x))
        for u, v in net.edges:
            edge_list.append((key(u), key(v), ("e", k)))

    def sort_key(kk):
        return (0 if kk[0] == "c" else 1, kk[1], g.idx(kk[2]))

    ordered = sorted(order, key=sort_key)
    nid = {kk: i for i, kk in enumerate(ordered)}
    xi = tuple(kk[2] for kk in ordered)
    adj = [set() for _ in ordered]
    edge_tag = {}
    for a, b, tag in edge_list:
        i, j = nid[a], nid[b]
        if i == j:
            continue
        adj[i].add(j)
        adj[j].add(i)
        edge_tag[(min(i, j), max(i, j))] = tag
    cluster_nodes = {c: frozenset(nid[kk] for kk in ordered if kk[0] == "c" and kk[1] == c)
                     for c in range(len(cg.clusters))}
    te_components = []
    for k, V0 in enumerate(comps):
        nodes = set()
        for (a, b), tag in edge_tag.items():
            if tag == ("e", k):
                nodes.update((a, b))
        te_components.append((V0, frozenset(nodes)))
    n_nodes = len(ordered)
    connected = _connected(adj)
    is_tree = connected and len(edge_tag) == n_nodes - 1
    return StableTree(
        g=g, F=F, Y=Y, params=rp, xi=xi, adj=tuple(tuple(sorted(s)) for s in adj),
        edge_tag=edge_tag, clusters=cg.clusters, cluster_nodes=cluster_nodes,
        te_components=tuple(te_components), separation=sg, cluster_graph=cg,
        is_tree=is_tree, approximate=approx, warnings=cg.warnings,
    )


def _connected(adj):
    if not adj:
        return True
    seen, queue = {0}, deque([0])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return len(seen) == len(adj)


# ---------------------------------------------------------------------
# checks


def branching_bound(k):
    return max(0, 2 * k - 4)


def tree_diagnostics(T, max_sources=64):
    """Measured constants of a stable tree (QI defects, Hausdorff closeness)."""
    g = T.g
    out = {"branching": T.branching(), "branching_bound": branching_bound(len(T.F)),
           "is_tree": T.is_tree, "nodes": T.size}
    out["leaves_in_F_union_Y"] = all(T.xi[a] in (T.F | T.Y) for a in T.leaves())
    sources = list(range(T.size))
    if len(sources) > max_sources:
        step = len(sources) / max_sources
        sources = sorted({int(i * step) for i in range(max_sources)})
    trows = T.tree_rows(sources)
    ximap = np.array([g.idx(x) for x in T.xi])
    comp_of = {}
    for k, (_, nodes) in enumerate(T.te_components):
        for a in nodes:
            comp_of.setdefault(a, set()).add(k)
    add_all, add_te = 0, 0
    for s, trow in zip(sources, trows):
        zrow = g.row(int(ximap[s]))[ximap].astype(np.int64)
        add_all = max(add_all, int((trow - zrow).max()))
        for k in comp_of.get(s, ()):
            nodes = np.array(sorted(T.te_components[k][1]))
            add_te = max(add_te, int((trow[nodes] - zrow[nodes]).max()))
    out["qi_additive"] = add_all
    out["te_qi_additive"] = add_te
    image = set(T.xi)
    out["hausdorff_to_hull"] = hausdorff_distance(
        g, image, [g.vertices[i] for i in np.flatnonzero(weak_hull_mask(g, T.F))])
    worst = 0
    for c, nodes in T.cluster_nodes.items():
        if nodes:
            worst = max(worst, hausdorff_distance(g, {T.xi[a] for a in nodes}, T.clusters[c]))
    out["tc_cluster_hausdorff"] = worst
    return out


def classify_clusters(g, T_or_sg, cg=None, lambdaF=None, eps=None, F=None):
    """Report on cluster types: E0 membership, interval shadows of E0
    clusters inside single edges of lambda(F), pairwise disjointness of E0
    shadows, the order of E0 chains along an edge, and the size bound."""
    if isinstance(T_or_sg, StableTree):
        T = T_or_sg
        sg, cg, F, eps = T.separation, T.cluster_graph, T.F, T.params.eps
        if lambdaF is None:
            lambdaF = steiner_network(g, [frozenset([x]) for x in sorted(F, key=g.idx)], T.params.exact_limit)
    else:
        sg = T_or_sg
    F = frozenset(F)
    k = len(F)
    adj = _network_adjacency(lambdaF) if lambdaF.edges else {v: set() for v in lambdaF.vertices}
    branch = {v for v, s in adj.items() if len(s) != 2}
    report = {"tags": list(sg.tags), "e0": sorted(sg.e0), "connected": sg.connected}
    report["non_e0_count"] = len(sg.nodes) - len(sg.e0)
    report["non_e0_bound"] = 2 * k - 2
    report["non_e0_ok"] = report["non_e0_count"] <= max(1, 2 * k - 2)
    shadows = {c: shadow(g, lambdaF, cg.clusters[c], eps) for c in sorted(sg.e0)}
    interval_ok = True
    position = {}
    for c, s in shadows.items():
        inner = [v for v in s if v in branch]
        sub_deg = [sum(1 for w in adj[v] if w in s) for v in s]
        if not s or any(d > 2 for d in sub_deg) or len(inner) > 0 and any(
                sum(1 for w in adj[v] if w in s) > 1 for v in inner):
            interval_ok = False
        position[c] = s
    report["e0_interval_shadows"] = interval_ok
    disjoint = all(not (shadows[a] & shadows[b]) for a, b in itertools.combinations(sorted(shadows), 2))
    report["e0_shadows_disjoint"] = disjoint
    # overlaps between shadows of any two clusters: they may meet in their
    # interiors when lambda(F) branches, but never at a leaf of either
    every = {c: shadow(g, lambdaF, cg.clusters[c], eps) for c in sg.nodes}
    overlap, leaf_free = 0, True
    for a, b in itertools.combinations(sorted(every), 2):
        common = every[a] & every[b]
        if not common:
            continue
        ends = {v for s in (every[a], every[b]) for v in s if sum(1 for w in adj.get(v, ()) if w in s) <= 1}
        leaf_free = leaf_free and not (common & ends)
        overlap = max(overlap, max(g.dist(u, v) for u in common for v in common))
    report["shadow_overlap_diameter"] = overlap
    report["shadow_overlap_leaf_free"] = leaf_free
    # group E0 clusters by the lambda(F) edge (branch-free segment) holding their shadow
    segments = _tree_segments(adj, branch)
    chains_ok = True
    for seg in segments:
        where = {v: i for i, v in enumerate(seg)}
        on = sorted((min(where[v] for v in s), c) for c, s in shadows.items() if s and all(v in where for v in s))
        for (_, a), (_, b) in zip(on, on[1:]):
            between = [m for m in sg.separators.get((min(a, b), max(a, b)), ()) if m in sg.e0]
            if between:
                chains_ok = False
    report["e0_chain_order"] = chains_ok
    report["free_non_e0"] = sum(1 for c in sg.nodes if c not in sg.e0 and not (cg.clusters[c] & F))
    return report


def _tree_segments(adj, branch):
    segs, used = [], set()
    for a in sorted(branch, key=repr):
        for b in adj[a]:
            if (a, b) in used:
                continue
            path = [a, b]
            used.add((a, b))
            used.add((b, a))
            while path[-1] not in branch:
                nxt = next(w for w in adj[path[-1]] if w != path[-2])
                used.add((path[-1], nxt))
                used.add((nxt, path[-1]))
                path.append(nxt)
            segs.append(path)
    if not segs and adj:
        segs.append(list(adj))
    return segs


# ---------------------------------------------------------------------
# comparing the trees of nearby inputs


@dataclass
class TreeCorrespondence:
    identical: list  # (segment index in T, segment index in T', common vertex run)
    exceptions: list  # (component in T, component in T' or None, hausdorff distance, reason)
    complement_T: list  # node sets
    complement_Tp: list
    measured: dict
    close_segments: list = field(default_factory=list)  # (i, i', hausdorff) for segments sharing no run

    @property
    def L(self):
        return self.measured["L"]


def _segment_vertices(T, seg, g_iso=None):
    xs = [T.xi[a] for a in seg]
    return [g_iso[x] for x in xs] if g_iso else xs


def _common_runs(A, B):
    """Maximal runs of consecutive entries of A that are also consecutive,
    in one direction, in B; returned as (start, end) index pairs into A."""
    pos = {v: i for i, v in enumerate(B)}
    out = []
    i = 0
    while i < len(A):
        if A[i] not in pos:
            i += 1
            continue
        j = i
        direction = 0
        while j + 1 < len(A) and A[j + 1] in pos:
            step = pos[A[j + 1]] - pos[A[j]]
            if abs(step) != 1 or (direction and step != direction):
                break
            direction = step
            j += 1
        out.append((i, j))
        i = j + 1
    return out


def _longest_common_run(A, B):
    runs = _common_runs(A, B)
    if not runs:
        return ()
    a, b = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
    return tuple(A[a:b + 1])


def _component_signature(T, k, g_iso=None):
    nodes = T.te_components[k][1]
    xs = {T.xi[a] for a in nodes}
    return frozenset(g_iso[x] for x in xs) if g_iso else frozenset(xs)


def compare_stable_trees(T, Tp, N, g_iso=None):
    """Correspondence between the T_e forests of two stable trees built from
    nearby data.  Stable pieces are maximal runs of edge vertices common to
    both trees, taken longest first with every vertex used at most once on
    each side; whatever T_e keeps outside them forms the complement.
    Components of T_e without an identical partner are the exceptions, each
    paired with the nearest leftover component of the other tree."""
    g = T.g
    F = {g_iso[x] for x in T.F} if g_iso else set(T.F)
    Y = {g_iso[x] for x in T.Y} if g_iso else set(T.Y)
    dF = hausdorff_distance(g, F, Tp.F)
    dY = len(Y ^ set(Tp.Y))
    if dF > 1 or dY > N:
        raise PreconditionError("inputs are not close enough to compare", {"d_haus_F": dF, "sym_diff_Y": dY})
    segs, segs_p = T.te_segments(), Tp.te_segments()
    verts = [_segment_vertices(T, s, g_iso) for s in segs]
    verts_p = [_segment_vertices(Tp, s) for s in segs_p]
    where_p = {}
    for j, vs in enumerate(verts_p):
        for x in vs:
            where_p.setdefault(x, set()).add(j)
    cands = []
    for i, vs in enumerate(verts):
        js = set()
        for x in vs:
            js |= where_p.get(x, set())
        for j in sorted(js):
            for a, b in _common_runs(vs, verts_p[j]):
                if b > a:
                    cands.append((a - b, i, j, a, b))
    heapq.heapify(cands)
    taken = [set() for _ in segs]
    taken_p = [set() for _ in segs_p]
    identical = []
    stable_nodes, stable_nodes_p = set(), set()
    while cands:
        _, i, j, a, b = heapq.heappop(cands)
        pos_p = {v: k for k, v in enumerate(verts_p[j])}
        free = [k not in taken[i] and pos_p[verts[i][k]] not in taken_p[j] for k in range(a, b + 1)]
        if not all(free):
            # keep the unclaimed sub-runs, queued again by their own length
            start = None
            for off, ok in enumerate(free + [False]):
                if ok and start is None:
                    start = off
                elif not ok and start is not None:
                    if off - 1 > start:
                        heapq.heappush(cands, (start - off + 1, i, j, a + start, a + off - 1))
                    start = None
            continue
        run = verts[i][a:b + 1]
        ks = [pos_p[v] for v in run]
        taken[i].update(range(a, b + 1))
        taken_p[j].update(ks)
        identical.append((i, j, tuple(run)))
        stable_nodes.update(segs[i][k] for k in range(a, b + 1))
        stable_nodes_p.update(segs_p[j][k] for k in ks)
    # segments sharing no run are paired by Hausdorff distance
    rest = [i for i in range(len(segs)) if not taken[i] and verts[i]]
    rest_p = [j for j in range(len(segs_p)) if not taken_p[j] and verts_p[j]]
    pairs = sorted((hausdorff_distance(g, verts[i], verts_p[j]), i, j) for i in rest for j in rest_p)
    close, used, used_p = [], set(), set()
    for d, i, j in pairs:
        if i in used or j in used_p:
            continue
        used.add(i)
        used_p.add(j)
        close.append((i, j, d))
    # component level
    sig = {k: _component_signature(T, k, g_iso) for k in range(len(T.te_components))}
    sig_p = {k: _component_signature(Tp, k) for k in range(len(Tp.te_components))}
    same_p = set(sig_p.values())
    same = set(sig.values())
    odd = [k for k, s in sig.items() if s not in same_p]
    odd_p = [k for k, s in sig_p.items() if s not in same]
    exceptions, unique = [], True
    if odd and odd_p:
        dist = sorted((hausdorff_distance(g, sig[k], sig_p[kp]), k, kp) for k in odd for kp in odd_p)
        done, done_p = set(), set()
        for d, k, kp in dist:
            if k in done or kp in done_p:
                continue
            ties = [t for t in dist if t[1] == k and t[0] == d and t[2] not in done_p]
            unique &= len(ties) == 1
            done.add(k)
            done_p.add(kp)
            exceptions.append((k, kp, d, "changed component"))
        exceptions.extend((k, None, None, "no partner") for k in odd if k not in done)
        exceptions.extend((None, kp, None, "no partner") for kp in odd_p if kp not in done_p)
    else:
        exceptions.extend((k, None, None, "no partner") for k in odd)
        exceptions.extend((None, kp, None, "no partner") for kp in odd_p)
    comp_T = _complement_components(T, stable_nodes)
    comp_Tp = _complement_components(Tp, stable_nodes_p)
    diam_T = _component_diameters(T, comp_T)
    diam_Tp = _component_diameters(Tp, comp_Tp)
    haus = max((e[2] for e in exceptions if e[2] is not None), default=0)
    measured = {
        "exceptions": max(len(odd), len(odd_p)),
        "complement_count": max(len(comp_T), len(comp_Tp)),
        "complement_diameter": max(diam_T + diam_Tp, default=0),
        "max_hausdorff": haus,
        "stable_pieces": len(identical),
        "unique_close_components": unique,
    }
    measured["L"] = max(measured["exceptions"], measured["complement_count"],
                        measured["complement_diameter"], measured["max_hausdorff"])
    return TreeCorrespondence(identical, exceptions, comp_T, comp_Tp, measured, close)


def _segment_component(T, segs):
    out = []
    for s in segs:
        a, b = s[0], s[1]
        tag = T.edge_tag[(min(a, b), max(a, b))]
        out.append(tag[1])
    return out


def _complement_components(T, stable):
    te = T.te_nodes()
    rest = te - stable
    comps, seen = [], set()
    for a in sorted(rest):
        if a in seen:
            continue
        comp, queue = {a}, deque([a])
        seen.add(a)
        while queue:
            u = queue.popleft()
            for w in T.adj[u]:
                e = (min(u, w), max(u, w))
                if w in rest and w not in seen and T.edge_tag.get(e, ("c",))[0] == "e":
                    seen.add(w)
                    comp.add(w)
                    queue.append(w)
        comps.append(frozenset(comp))
    return comps


def _component_diameters(T, comps):
    out = []
    for comp in comps:
        if len(comp) == 1:
            out.append(0)
            continue
        start = min(comp)
        far, d1 = _bfs_far(T, comp, start)
        _, d2 = _bfs_far(T, comp, far)
        out.append(d2)
    return out


def _bfs_far(T, comp, start):
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in T.adj[u]:
            if w in comp and w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    far = max(dist, key=lambda a: (dist[a], -a))
    return far, dist[far]
