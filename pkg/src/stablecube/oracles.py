"""Brute-force reference computations.

Everything here is deliberately naive and shares no code with the engine
beyond the plain data types: walls are compared as sets, distances come from
a hand-written BFS, Steiner trees from subset enumeration.  The acceptance
suites diff engine output against these.
"""

from __future__ import annotations

import itertools
from collections import deque

from .errors import ResourceError


def bfs(adj, source):
    """Hop distances from `source` in an adjacency mapping."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def graph_adjacency(g):
    return {v: list(g.neighbors(v)) for v in g.vertices}


# ---------------------------------------------------------------------
# wallspaces


def walls_cross(ws, i, j):
    (L1, R1), (L2, R2) = ws.walls[i], ws.walls[j]
    return all(a & b for a in (L1, R1) for b in (L2, R2))


def coherent_orientations(ws, limit=16):
    """Every orientation whose chosen halfspaces pairwise intersect.  With
    finitely many walls these are exactly the vertices of the dual complex."""
    n = len(ws.walls)
    if n > limit:
        raise ResourceError(f"{n} walls is too many for exhaustive enumeration")
    side = [(L, R) for L, R in ws.walls]
    out = set()
    for v in range(1 << n):
        chosen = [side[i][(v >> i) & 1] for i in range(n)]
        if all(a & b for a, b in itertools.combinations(chosen, 2)):
            out.add(v)
    return frozenset(out)


def is_median_graph(vertices):
    """Majority vote of any three vertices is a vertex, and it is the unique
    vertex lying on geodesics between each pair (checked on bitmasks)."""
    vs = sorted(vertices)
    vset = set(vs)
    for x, y, z in itertools.combinations_with_replacement(vs, 3):
        m = (x & y) | (y & z) | (x & z)
        if m not in vset:
            return False, (x, y, z)
    return True, None


def skeleton_distances(vertices):
    """BFS on the 1-skeleton: vertices adjacent when they differ in one bit."""
    vs = set(vertices)
    adj = {v: [v ^ (1 << i) for i in range(max(vs).bit_length() + 1) if v ^ (1 << i) in vs] for v in vs}
    return {v: bfs(adj, v) for v in vs}


def cube_move_distances(ws, vertices):
    """BFS where one move jumps between two vertices of a common cube,
    i.e. whose separating walls pairwise cross."""
    n = len(ws.walls)
    cross = {(i, j) for i in range(n) for j in range(n) if i != j and walls_cross(ws, i, j)}
    vs = sorted(vertices)
    adj = {v: [] for v in vs}
    for a, b in itertools.combinations(vs, 2):
        sep = [i for i in range(n) if ((a ^ b) >> i) & 1]
        if all((i, j) in cross for i, j in itertools.combinations(sep, 2)):
            adj[a].append(b)
            adj[b].append(a)
    return {v: bfs(adj, v) for v in vs}


# ---------------------------------------------------------------------
# graphs


def steiner_size(g, terminals, limit=22):
    """Edges of a smallest tree containing the terminals, by trying vertex
    sets of increasing size and testing connectivity of the induced graph."""
    terms = set(terminals)
    others = [v for v in g.vertices if v not in terms]
    if g.n > limit:
        raise ResourceError(f"{g.n} vertices is too many for exhaustive Steiner search")
    adj = graph_adjacency(g)
    for extra in range(len(others) + 1):
        for S in itertools.combinations(others, extra):
            keep = terms | set(S)
            start = next(iter(keep))
            sub = {v: [w for w in adj[v] if w in keep] for v in keep}
            if len(bfs(sub, start)) == len(keep):
                return len(keep) - 1
    raise AssertionError("graph is disconnected")


def geodesic_vertices(g, F):
    """Union of all geodesics between points of F."""
    adj = graph_adjacency(g)
    D = {x: bfs(adj, x) for x in set(F)}
    out = set()
    for a, b in itertools.combinations_with_replacement(sorted(set(F), key=g.idx), 2):
        for v in g.vertices:
            if D[a][v] + D[b][v] == D[a][b]:
                out.add(v)
    return out


def hull_vertices(h, F, theta):
    """Points of X whose every projection lies within theta of the union of
    geodesics between the projections of F."""
    keep = set(h.X.vertices)
    for V in h.domains:
        g = h.factors[V]
        proj = {x: g.vertices[h.proj(V, x)] for x in h.X.vertices}
        core = geodesic_vertices(g, {proj[x] for x in F})
        adj = graph_adjacency(g)
        near = set()
        for c in core:
            near |= {v for v, d in bfs(adj, c).items() if d <= theta}
        keep &= {x for x in h.X.vertices if proj[x] in near}
    return keep


def four_point_delta(g):
    """Largest half-gap between the two biggest pair sums over quadruples."""
    adj = graph_adjacency(g)
    D = {v: bfs(adj, v) for v in g.vertices}
    best = 0
    for a, b, c, d in itertools.combinations(g.vertices, 4):
        s = sorted((D[a][b] + D[c][d], D[a][c] + D[b][d], D[a][d] + D[b][c]))
        best = max(best, s[2] - s[1])
    return best / 2


# ---------------------------------------------------------------------
# cube complexes with known shape


def grid_complex_vertices(a, b):
    """Vertices of the a-by-b square grid as bitmasks over walls
    x_0..x_{a-1}, y_0..y_{b-1}: bit x_k is set when the first coordinate
    exceeds k."""
    out = set()
    for i in range(a + 1):
        for j in range(b + 1):
            out.add(((1 << i) - 1) | (((1 << j) - 1) << a))
    return frozenset(out)


def grid_complex_labels(a, b):
    return [("x", k) for k in range(a)] + [("y", k) for k in range(b)]


def grid_quarters(a, b):
    """Quarter table of the grid complex: walls of one factor are nested,
    walls of different factors cross."""
    n = a + b
    Q = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if (i < a) != (j < a):
                Q[i][j] = 0b1111
            else:
                # for nested walls i < j: side 1 of i contains side 1 of j
                lo, hi = (i, j) if i < j else (j, i)
                q = 0
                for si in (0, 1):
                    for sj in (0, 1):
                        # sides of lo and hi meet unless (lo=0, hi=1)
                        if not (si == 0 and sj == 1 if i == lo else si == 1 and sj == 0):
                            q |= 1 << (2 * si + sj)
                Q[i][j] = q
    return Q
