"""Move sequences contracting a finite configuration of vertices of a cube
complex into a single cube, and their behaviour under hyperplane deletion.

A configuration is a tuple of vertex bitmasks indexed by positions of P.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .cubekernel import delete_hyperplanes, linf_distance
from .errors import InputError, InvariantViolation


def _walls(mask):
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def separating_mask(f):
    if not f:
        raise InputError("configuration is empty")
    acc = 0
    for v in f[1:]:
        acc |= v ^ f[0]
    return acc


def separating_walls(cc, f):
    return frozenset(_walls(separating_mask(tuple(f))))


@dataclass
class Classification:
    Hf: frozenset
    ext: frozenset
    trans: frozenset
    p0: dict  # transitional wall -> frozenset of indices of P on the adjacent side


def classify_walls(cc, f):
    f = tuple(f)
    Hf = separating_walls(cc, f)
    ext, trans, p0 = set(), set(), {}
    for h in sorted(Hf):
        sides = ([], [])
        for p, v in enumerate(f):
            sides[(v >> h) & 1].append(p)
        adj = [all(cc.adjacent_to_wall(f[p], h) for p in side) for side in sides]
        if adj[0] or adj[1]:
            ext.add(h)
            if not (adj[0] and adj[1]):
                trans.add(h)
                p0[h] = frozenset(sides[0] if adj[0] else sides[1])
    return Classification(Hf, frozenset(ext), frozenset(trans), p0)


def move_step(cc, f, cls=None):
    """One Move: every point of P0(H) crosses H, for every transitional H."""
    f = tuple(f)
    cls = cls or classify_walls(cc, f)
    out = []
    for p, v in enumerate(f):
        J = [h for h in sorted(cls.trans) if p in cls.p0[h]]
        for a in range(len(J)):
            for b in range(a + 1, len(J)):
                if not cc.crosses(J[a], J[b]):
                    raise InvariantViolation("J(p) is not mutually crossing", (p, J[a], J[b]))
        for h in J:
            v ^= 1 << h
        out.append(v)
    out = tuple(out)
    after = separating_walls(cc, out)
    if after != cls.Hf - cls.trans:
        raise InvariantViolation("separators after a move differ from Hf minus Trans", (cls.Hf, after))
    for v in out:
        if v not in cc.vertices:
            raise InvariantViolation("move left the vertex set", v)
    return out


def move_sequence(cc, f):
    """[f_0, ..., f_n] with Trans(f_n) empty."""
    seq = [tuple(f)]
    if not seq[0]:
        raise InputError("configuration is empty")
    while True:
        cls = classify_walls(cc, seq[-1])
        if not cls.trans:
            return seq
        seq.append(move_step(cc, seq[-1], cls))


def classify_sequence(cc, seq):
    return [classify_walls(cc, f) for f in seq]


def _at(seq, i):
    return seq[min(i, len(seq) - 1)]


def barycentric_cube(cc, f):
    """Final image of the move sequence and its canonical representative:
    per-wall majority over the image set, ties resolved towards side 0 (the
    lexicographically least choice)."""
    final = move_sequence(cc, f)[-1]
    image = sorted(set(final))
    rep = 0
    for i in range(cc.n):
        ones = sum((v >> i) & 1 for v in image)
        if 2 * ones > len(image):
            rep |= 1 << i
    if rep not in cc.vertices:
        raise InvariantViolation("majority representative is not a vertex", rep)
    return frozenset(image), rep


def first_extremal_times(cc, seq):
    out = {}
    for i, f in enumerate(seq):
        for h in classify_walls(cc, f).ext:
            out.setdefault(h, i)
    return out


@dataclass
class ContractionReport:
    n: int
    items: dict = field(default_factory=dict)  # name -> (passed, witness)
    measured: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(ok for ok, _ in self.items.values())

    def record(self, name, ok, witness=None):
        prev = self.items.get(name)
        if prev is None or (prev[0] and not ok):
            self.items[name] = (bool(ok), witness)


def verify_contraction(cc, f, deletions=None, surjection=None, structure=True):
    """Check the contraction properties of the move sequence of f.

    deletions: iterable of wall sets (single walls or mutually crossing sets)
    surjection: list g with g[q] in range(len(f)); checks image dependence.
    structure: also check how extremal and transitional walls sit at each step.
    """
    f = tuple(f)
    seq = move_sequence(cc, f)
    n = len(seq) - 1
    rep = ContractionReport(n)
    final = seq[-1]
    diam = max((linf_distance(cc, a, b) for a in final for b in final), default=0)
    rep.record("diam_inf_final", diam <= 1, diam)
    rep.measured["n"] = n
    rep.record("n_at_most_Hf", n <= len(separating_walls(cc, f)), n)
    for i in range(n):
        for p in range(len(f)):
            step = linf_distance(cc, seq[i][p], seq[i + 1][p])
            if step > 1:
                rep.record("step_size", False, (i, p, step))
    rep.record("step_size", True)
    for p in range(len(f)):
        crossed = Counter()
        for i in range(n):
            for h in _walls(seq[i][p] ^ seq[i + 1][p]):
                crossed[h] += 1
        twice = [h for h, c in crossed.items() if c > 1]
        rep.record("no_wall_crossed_twice", not twice, (p, twice) if twice else None)
    for h in range(cc.n):
        start = {(v >> h) & 1 for v in f}
        end = {(v >> h) & 1 for v in final}
        if len(start) == 1 and len(end) == 1 and start != end:
            rep.record("no_wall_separates_start_end", False, h)
    rep.record("no_wall_separates_start_end", True)
    if surjection is not None:
        if set(surjection) != set(range(len(f))):
            raise InputError("surjection must hit every index of P")
        fg = tuple(f[q] for q in surjection)
        seq_g = move_sequence(cc, fg)
        ok = len(seq_g) == len(seq) and all(
            seq_g[i] == tuple(seq[i][q] for q in surjection) for i in range(len(seq)))
        rep.record("image_dependence", ok, None if ok else (len(seq), len(seq_g)))
    if structure:
        _check_structure(cc, seq, rep)
    for G in deletions or ():
        G = frozenset([G]) if isinstance(G, int) else frozenset(G)
        _check_deletion(cc, seq, G, rep)
    return rep


def _check_structure(cc, seq, rep):
    for i, fi in enumerate(seq):
        cls = classify_walls(cc, fi)
        if cls.Hf and not cls.ext:
            rep.record("ext_nonempty", False, i)
        for j in cls.ext - cls.trans:
            others = [h for h in cls.Hf if h != j and not cc.crosses(h, j)]
            if others:
                rep.record("ext_not_trans_crosses_all", False, (i, j, others))
        single_cube = all(cc.crosses(a, b) for a in cls.Hf for b in cls.Hf if a < b)
        if (not cls.trans) != single_cube:
            rep.record("trans_empty_iff_one_cube", False, i)
    rep.record("ext_nonempty", True)
    rep.record("ext_not_trans_crosses_all", True)
    rep.record("trans_empty_iff_one_cube", True)


def _check_deletion(cc, seq, G, rep):
    for a in G:
        for b in G:
            if a < b and not cc.crosses(a, b):
                raise InputError("deleted walls must be mutually crossing")
    cc2, res = delete_hyperplanes(cc, [cc.labels[i] for i in G])
    f = seq[0]
    seq2 = move_sequence(cc2, tuple(res[v] for v in f))
    n, n2 = len(seq) - 1, len(seq2) - 1
    tag = tuple(sorted(G))
    rep.record("deletion_step_count", abs(n - n2) <= 1, None if abs(n - n2) <= 1 else (tag, n, n2))
    worst = 0
    for i in range(max(n, n2) + 1):
        a, b = _at(seq, i), _at(seq2, i)
        for p in range(len(f)):
            worst = max(worst, linf_distance(cc2, res[a[p]], b[p]))
    rep.record("deletion_fellow_travel", worst <= 1, None if worst <= 1 else (tag, worst))
    rep.measured["max_fellow_travel"] = max(rep.measured.get("max_fellow_travel", 0), worst)
    # exact commutation of one move with deletion when G avoids Ext
    cls = classify_walls(cc, f)
    if not (G & cls.ext):
        left = tuple(res[v] for v in _at(seq, 1))
        right = _at(seq2, 1)
        rep.record("easy_commute", left == right, None if left == right else tag)
    # first-extremal times shift by 0 or 1
    e1 = first_extremal_times(cc, seq)
    e2 = first_extremal_times(cc2, seq2)
    keep = [i for i in range(cc.n) if i not in G]
    for new, old in enumerate(keep):
        if old in e1 and old in cls.Hf:
            d = e1[old] - e2.get(new, -10)
            if d not in (0, 1):
                rep.record("time_shift", False, (tag, old, e1[old], e2.get(new)))
    rep.record("time_shift", True)
    rep.record("easy_commute", True)
