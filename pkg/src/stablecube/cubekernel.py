"""CAT(0) cube complexes given by their walls.

A vertex is an orientation of every wall, stored as an int bitmask: bit i set
means the vertex picks side 1 ("R") of wall i.  Everything the algorithms need
about the wall system is which of the four quarter-spaces of each pair of
walls are nonempty; this is held in `quarters[i][j]`, a 4-bit set where bit
(2a+b) records that "side a of wall i meets side b of wall j".
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ResourceError

DEFAULT_MAX_WALLS = 20


def _bit(a, b):
    return 1 << (2 * a + b)


def _side(v, i):
    return (v >> i) & 1


class Wallspace:
    """Ground set with a list of walls, each a complementary pair (L, R)."""

    def __init__(self, ground, walls):
        self.ground = tuple(ground)
        gset = set(self.ground)
        if len(gset) != len(self.ground):
            raise InputError("ground set has repeated elements")
        self.walls = []
        seen = set()
        for k, (L, R) in enumerate(walls):
            L, R = frozenset(L), frozenset(R)
            if L & R or (L | R) != gset:
                raise InputError(f"wall {k} is not a partition of the ground set")
            if not L or not R:
                raise InputError(f"wall {k} is degenerate (an empty side)")
            key = min(L, R, key=lambda s: sorted(map(repr, s)))
            if key in seen:
                raise InputError(f"wall {k} duplicates an earlier wall")
            seen.add(key)
            self.walls.append((L, R))

    def principal_masks(self):
        masks = {}
        for x in self.ground:
            m = 0
            for i, (_, R) in enumerate(self.walls):
                if x in R:
                    m |= 1 << i
            masks[x] = m
        return masks

    @classmethod
    def from_json(cls, data):
        def conv(v):
            return tuple(conv(t) for t in v) if isinstance(v, list) else v

        try:
            ground = [conv(x) for x in data["ground"]]
            walls = [([conv(x) for x in L], [conv(x) for x in R]) for L, R in data["walls"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad wallspace JSON: {exc}") from None
        return cls(ground, walls)

    def to_json(self):
        key = self.ground.index
        return {
            "ground": list(self.ground),
            "walls": [[sorted(L, key=key), sorted(R, key=key)] for L, R in self.walls],
        }


def quarters_from_masks(masks, n):
    """Quarter table realised by a family of orientations."""
    masks = sorted(set(masks))
    if not masks or n == 0:
        return [[0] * n for _ in range(n)]
    nbytes = (n + 7) // 8
    raw = np.frombuffer(b"".join(m.to_bytes(nbytes, "little") for m in masks), dtype=np.uint8)
    bits = np.unpackbits(raw.reshape(len(masks), nbytes), axis=1, bitorder="little")[:, :n]
    one = bits.astype(np.float32)
    zero = 1.0 - one
    table = np.zeros((n, n), dtype=np.int64)
    for a, A in ((0, zero), (1, one)):
        for b, B in ((0, zero), (1, one)):
            table |= np.where((A.T @ B) > 0, _bit(a, b), 0)
    np.fill_diagonal(table, 0)
    return table.tolist()


def _rows_to_ints(mat):
    """Each boolean row of `mat` as an int bitmask (bit j = column j)."""
    if mat.size == 0:
        return [0] * mat.shape[0]
    packed = np.packbits(mat, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


@dataclass
class CubeComplexV:
    """Dual cube complex: walls, quarter table and the vertex set."""

    labels: tuple
    quarters: list
    vertices: frozenset
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n
        self.pos = {lab: i for i, lab in enumerate(self.labels)}
        # Row masks over j, all derived from empty quarters: when wall i takes
        # side a, walls in _must0[a][i] are forced to side 0 and walls in
        # _must1[a][i] to side 1.  _sep1[h] / _sep0[h] hold the walls k (not
        # crossing h) whose side 1 / side 0 lies away from h.
        Q = np.asarray(self.quarters, dtype=np.int64).reshape(n, n)
        off = ~np.eye(n, dtype=bool)
        cross = off & (Q == 15)
        empty = {(a, c): off & ((Q & _bit(a, c)) == 0) for a in (0, 1) for c in (0, 1)}
        self._cross = _rows_to_ints(cross)
        self._must0 = [_rows_to_ints(empty[(a, 1)]) for a in (0, 1)]
        self._must1 = [_rows_to_ints(empty[(a, 0)]) for a in (0, 1)]
        self._sep1 = _rows_to_ints(~cross & (empty[(0, 1)] | empty[(1, 1)]))
        self._sep0 = _rows_to_ints(~cross & (empty[(0, 0)] | empty[(1, 0)]))
        self._full = (1 << n) - 1

    @property
    def n(self):
        return len(self.labels)

    # -- wall relations -------------------------------------------------
    def crosses(self, i, j):
        return i != j and bool((self._cross[i] >> j) & 1)

    def cross_mask(self, i):
        return self._cross[i]

    def halfspaces_disjoint(self, i, a, j, b):
        if i == j:
            return a != b
        return not self.quarters[i][j] & _bit(a, b)

    def halfspace_contains(self, i, a, j, b):
        """Is halfspace (i, a) contained in halfspace (j, b)?"""
        if i == j:
            return a == b
        return self.halfspaces_disjoint(i, a, j, 1 - b)

    def is_coherent(self, v):
        for i in range(self.n):
            a = (v >> i) & 1
            if v & self._must0[a][i] or (~v) & self._must1[a][i] & self._full:
                return False
        return True

    def flip_ok(self, v, i):
        a = 1 - ((v >> i) & 1)
        return not (v & self._must0[a][i]) and not ((~v) & self._must1[a][i] & self._full)

    def separated_from_wall(self, v, h):
        """Mask of walls separating vertex v from wall h."""
        return (v & self._sep1[h]) | ((~v) & self._sep0[h] & self._full)

    def adjacent_to_wall(self, v, h):
        return self.separated_from_wall(v, h) == 0

    # -- vertex structure -------------------------------------------------
    def neighbors(self, v):
        return [v ^ (1 << i) for i in range(self.n) if (v ^ (1 << i)) in self.vertices]

    def bits(self, v):
        return "".join(str((v >> i) & 1) for i in range(self.n))

    def dimension(self):
        """Largest set of pairwise crossing walls."""
        best = 0 if self.n == 0 else 1
        order = list(range(self.n))

        def grow(clique, cand):
            nonlocal best
            best = max(best, len(clique))
            for idx, w in enumerate(cand):
                if len(clique) + len(cand) - idx <= best:
                    return
                grow(clique + [w], [u for u in cand[idx + 1:] if self.crosses(w, u)])

        grow([], order)
        return best

    def to_json(self):
        return {
            "walls": [repr(lab) if not isinstance(lab, (int, str)) else lab for lab in self.labels],
            "vertices": sorted(self.bits(v) for v in self.vertices),
        }

    def to_dot(self):
        lines = ["graph Q {"]
        for v in sorted(self.vertices):
            lines.append(f'  "{self.bits(v)}";')
        for v in sorted(self.vertices):
            for w in self.neighbors(v):
                if w > v:
                    lines.append(f'  "{self.bits(v)}" -- "{self.bits(w)}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def complex_from_masks(masks, n, labels=None, max_walls=None, max_vertices=2_000_000, quarters=None):
    """Dual complex of the wall system realised by `masks` (principal
    orientations), enumerated by closure under single-wall flips."""
    labels = tuple(range(n)) if labels is None else tuple(labels)
    if max_walls is not None and n > max_walls:
        raise ResourceError(f"{n} walls exceeds the enumeration bound {max_walls}")
    masks = sorted(set(masks))
    Q = quarters if quarters is not None else quarters_from_masks(masks, n)
    cc = CubeComplexV(labels, Q, frozenset())
    seen = set(masks)
    queue = deque(masks)
    while queue:
        v = queue.popleft()
        for i in range(n):
            w = v ^ (1 << i)
            if w not in seen and cc.flip_ok(v, i):
                seen.add(w)
                if len(seen) > max_vertices:
                    raise ResourceError(f"more than {max_vertices} vertices")
                queue.append(w)
    cc.vertices = frozenset(seen)
    return cc


def dual_complex(ws, max_walls=DEFAULT_MAX_WALLS):
    n = len(ws.walls)
    if n > max_walls:
        raise ResourceError(f"{n} walls exceeds the enumeration bound {max_walls}")
    masks = list(ws.principal_masks().values())
    return complex_from_masks(masks, n)


def l1_distance(cc, x, y):
    return bin(x ^ y).count("1")


def separators(cc, x, y):
    d = x ^ y
    return [i for i in range(cc.n) if (d >> i) & 1]


def linf_distance(cc, x, y):
    """Longest chain of pairwise non-crossing walls separating x from y."""
    sep = separators(cc, x, y)
    if not sep:
        return 0
    # among separators, h precedes k when the x-side of h lies in the x-side of k
    below = {h: [k for k in sep if k != h and not cc.crosses(h, k)
                 and cc.halfspace_contains(k, _side(x, k), h, _side(x, h))] for h in sep}
    memo = {}

    def chain(h):
        if h not in memo:
            memo[h] = 1 + max((chain(k) for k in below[h]), default=0)
        return memo[h]

    return max(chain(h) for h in sep)


def median(cc, x, y, z):
    return (x & y) | (y & z) | (x & z)


def delete_hyperplanes(cc, G):
    """Restriction quotient onto the walls whose labels are not in G.

    Returns the new complex (walls keep their labels) and the vertex map.
    """
    G = set(G)
    keep = [i for i in range(cc.n) if cc.labels[i] not in G]
    labels = tuple(cc.labels[i] for i in keep)

    def restrict(v):
        out = 0
        for new, old in enumerate(keep):
            if (v >> old) & 1:
                out |= 1 << new
        return out

    res = {v: restrict(v) for v in cc.vertices}
    Q = [[cc.quarters[a][b] for b in keep] for a in keep]
    out = CubeComplexV(labels, Q, frozenset(res.values()))
    return out, res


def restrict_mask(cc, v, keep_labels):
    out = 0
    for new, lab in enumerate(keep_labels):
        if (v >> cc.pos[lab]) & 1:
            out |= 1 << new
    return out


@dataclass
class BijectionResult:
    ok: bool
    vertex_map: dict | None = None
    violation: tuple | None = None
    reason: str = ""


def apply_halfspace_bijection(cc1, cc2, iota):
    """Cube isomorphism induced by a bijection of halfspaces.

    `iota` maps (label1, side) -> (label2, side).  When it preserves
    complements and disjointness the induced map on vertices is returned and
    certified to be a graph isomorphism; otherwise the first violating pair
    is reported.
    """
    hs1 = [(lab, s) for lab in cc1.labels for s in (0, 1)]
    if set(iota) != set(hs1):
        raise InputError("iota must be defined on every halfspace of the source complex")
    images = [iota[h] for h in hs1]
    if len(set(images)) != len(images) or set(images) != {(lab, s) for lab in cc2.labels for s in (0, 1)}:
        raise InputError("iota is not a bijection onto the target halfspaces")
    for lab in cc1.labels:
        (l0, s0), (l1, s1) = iota[(lab, 0)], iota[(lab, 1)]
        if l0 != l1 or s0 == s1:
            return BijectionResult(False, violation=((lab, 0), (lab, 1)), reason="complement")
    for (a, sa), (b, sb) in itertools.combinations(hs1, 2):
        if a == b:
            continue
        d1 = cc1.halfspaces_disjoint(cc1.pos[a], sa, cc1.pos[b], sb)
        (a2, ta), (b2, tb) = iota[(a, sa)], iota[(b, sb)]
        d2 = cc2.halfspaces_disjoint(cc2.pos[a2], ta, cc2.pos[b2], tb)
        if d1 != d2:
            return BijectionResult(False, violation=((a, sa), (b, sb)), reason="disjointness")
    perm = []
    for lab in cc2.labels:
        src = next(l for l in cc1.labels if iota[(l, 0)][0] == lab)
        perm.append((cc1.pos[src], iota[(src, 1)][1]))

    def h(v):
        out = 0
        for new, (old, s_for_one) in enumerate(perm):
            bit = (v >> old) & 1
            if (s_for_one if bit else 1 - s_for_one):
                out |= 1 << new
        return out

    vmap = {v: h(v) for v in cc1.vertices}
    if set(vmap.values()) != set(cc2.vertices) or len(set(vmap.values())) != len(vmap):
        return BijectionResult(False, vmap, reason="vertex sets do not correspond")
    for v in cc1.vertices:
        if sorted(vmap[w] for w in cc1.neighbors(v)) != sorted(cc2.neighbors(vmap[v])):
            return BijectionResult(False, vmap, violation=(v,), reason="adjacency")
    return BijectionResult(True, vmap)
