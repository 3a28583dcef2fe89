"""Coarse barycenters and discrete bicombings built from move sequences in
the cubulation of a hull."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .hhsmodel import hull_mask
from .hullcubulation import CubulationParams, cubulate
from .movecontract import barycentric_cube, move_sequence


@dataclass
class ContractionTrace:
    cubulation: object
    points: tuple  # the points of F, in X-index order
    sequence: list  # per step, a tuple of Q-vertices aligned with `points`

    @property
    def n(self):
        return len(self.sequence) - 1

    def at(self, x, i):
        """psi_i(x), constant after the last step."""
        return self.sequence[min(i, self.n)][self.points.index(x)]


def contraction_trace(h, F, params=None, cr=None):
    F = tuple(sorted(set(F), key=h.X.idx))
    if not F:
        raise InputError("F must be nonempty")
    cr = cr or cubulate(h, F, params)
    start = tuple(cr.psi(x) for x in F)
    return ContractionTrace(cr, F, move_sequence(cr.Q, start))


@dataclass
class Barycenter:
    point: object
    trace: ContractionTrace
    cube: frozenset
    representative: int


def barycenter_data(h, F, params=None):
    trace = contraction_trace(h, F, params)
    cube, rep = barycentric_cube(trace.cubulation.Q, trace.sequence[0])
    return Barycenter(trace.cubulation.phi(rep), trace, cube, rep)


def barycenter(h, F, params=None):
    """Realisation of the canonical vertex of the barycentric cube of psi(F).
    Only the set F matters, so the result is invariant under reordering."""
    return barycenter_data(h, F, params).point


# ---------------------------------------------------------------------
# bicombing


@dataclass
class DiscretePath:
    steps: list
    x: object
    y: object
    snap: tuple = (0, 0)  # distances moved at the two endpoints
    omega: list = field(default_factory=list)  # Q-vertices behind the steps

    @property
    def m(self):
        return len(self.steps) - 1

    def at(self, t):
        """Trivially extended: constant at y after the last step."""
        if t < 0:
            raise InputError("path parameter must be nonnegative")
        return self.steps[min(t, self.m)]

    def to_json(self):
        return {"x": self.x, "y": self.y, "steps": list(self.steps), "snap": list(self.snap)}


def bicombing_path(h, x, y, params=None):
    """x moves towards y through psi_0(x), ..., psi_n(x), then the path
    continues backwards along psi_n(y), ..., psi_0(y); the realised endpoints
    are replaced by x and y."""
    if x == y:
        return DiscretePath([x], x, y)
    trace = contraction_trace(h, [x, y], params)
    cr = trace.cubulation
    n = trace.n
    omega = [trace.at(x, i) for i in range(n + 1)] + [trace.at(y, 2 * n - i) for i in range(n + 1, 2 * n + 1)]
    if n == 0:
        # a single cube vertex cannot carry two distinct endpoints: the path
        # jumps from x to y, both ends backed by that vertex
        omega = omega * 2
    steps = [cr.phi(v) for v in omega]
    snap = (h.X.dist(steps[0], x), h.X.dist(steps[-1], y))
    steps[0], steps[-1] = x, y
    return DiscretePath(steps, x, y, snap, omega)


def walls_crossed_twice(path):
    seen, twice = set(), set()
    for a, b in zip(path.omega, path.omega[1:]):
        d = a ^ b
        i = 0
        while d:
            if d & 1:
                (twice if i in seen else seen).add(i)
            d >>= 1
            i += 1
    return sorted(twice)


def _pairwise(g_row, idxs):
    """Distance matrix between the listed vertex indices of a graph."""
    uniq, inv = np.unique(idxs, return_inverse=True)
    rows = np.stack([g_row(int(u))[uniq] for u in uniq])
    return rows[np.ix_(inv, inv)].astype(np.int64)


def _thin(m, cap):
    if m + 1 <= cap:
        return np.arange(m + 1)
    return np.unique(np.linspace(0, m, cap).round().astype(int))


def path_quality(h, path, cap=200):
    """Measured quasi-geodesic constants of a path: largest step, largest
    deviation from the best constant-speed parametrisation, and per domain
    the largest backtrack of its projection."""
    X = h.X
    if path.m == 0:
        return {"steps": 0, "step_max": 0, "qi_defect": 0.0, "backtrack": {V: 0 for V in h.domains}}
    sel = _thin(path.m, cap)
    idx = np.array([X.idx(path.steps[i]) for i in sel])
    D = _pairwise(X.row, idx)
    T = np.abs(sel[:, None] - sel[None, :]).astype(float)
    speed = X.dist(path.x, path.y) / path.m
    out = {"steps": path.m,
           "step_max": max(X.dist(a, b) for a, b in zip(path.steps, path.steps[1:])),
           "qi_defect": float(np.abs(D - speed * T).max())}
    back = {}
    for V in h.domains:
        g = h.factors[V]
        P = _pairwise(g.row, h.pi[V][idx])
        back[V] = _backtrack(P)
    out["backtrack"] = back
    return out


def _backtrack(P):
    """max over i < j < k of the Gromov product (p_i | p_k)_{p_j}."""
    m = P.shape[0]
    worst = 0
    for j in range(1, m - 1):
        A = P[:j, j][:, None] + P[j, j + 1:][None, :] - P[:j, j + 1:]
        worst = max(worst, int(A.max()))
    return worst / 2


# ---------------------------------------------------------------------
# verification


@dataclass
class StabilityReport:
    passed: bool
    measured: dict
    failures: list

    def to_json(self):
        return {"passed": self.passed, "measured": self.measured, "failures": [list(map(str, f)) for f in self.failures]}


def verify_barycenter_stability(h, cases, params=None, permutations=3, seed=0):
    """cases: iterable of (F, F') or (F, F', g) with F' close to F (or to
    gF).  Exact checks are permutation invariance and hull membership;
    measured are kappa1 = max d(bary(gF), g bary(F)) over the cases and the
    largest difference between the move-sequence lengths of F and F'."""
    rng = np.random.default_rng(seed)
    params = params or CubulationParams()
    X = h.X
    kappa1, dn, failures = 0, 0, []
    for t, case in enumerate(cases):
        F, Fp = list(case[0]), list(case[1])
        g = case[2] if len(case) > 2 else None
        bF = barycenter_data(h, F, params)
        bFp = barycenter_data(h, Fp, params)
        for _ in range(permutations):
            perm = [F[int(i)] for i in rng.permutation(len(F))]
            if barycenter(h, perm, params) != bF.point:
                failures.append(("permutation", t, perm))
        for b, S in ((bF, F), (bFp, Fp)):
            theta = b.trace.cubulation.params["theta"]
            if not hull_mask(h, S, theta)[X.idx(b.point)]:
                failures.append(("hull", t, b.point))
        image = bF.point if g is None else g.point(h, bF.point)
        kappa1 = max(kappa1, X.dist(image, bFp.point))
        dn = max(dn, abs(bF.trace.n - bFp.trace.n))
    return StabilityReport(not failures, {"kappa1": kappa1, "move_count_gap": dn}, failures)


def verify_bicombing(h, cases, params=None):
    """cases: iterable of ((x, y), (x', y')) with d(x, x'), d(y, y') <= 1.
    Exact check: no wall is crossed twice along a combing line.  Measured:
    kappa2 = max_t d(path(t), path'(t)), step size, constant-speed defect,
    endpoint snap and per-domain backtrack."""
    X = h.X
    m = {"kappa2": 0, "step_max": 0, "qi_defect": 0.0, "snap": 0, "backtrack": 0.0, "paths": 0}
    failures = []
    cache = {}

    def get(pair):
        if pair not in cache:
            cache[pair] = bicombing_path(h, pair[0], pair[1], params)
            p = cache[pair]
            q = path_quality(h, p)
            m["paths"] += 1
            m["step_max"] = max(m["step_max"], q["step_max"])
            m["qi_defect"] = max(m["qi_defect"], q["qi_defect"])
            m["snap"] = max(m["snap"], *p.snap)
            m["backtrack"] = max(m["backtrack"], max(q["backtrack"].values()))
            twice = walls_crossed_twice(p)
            if twice:
                failures.append(("wall crossed twice", pair, twice))
        return cache[pair]

    for t, ((x, y), (xp, yp)) in enumerate(cases):
        if X.dist(x, xp) > 1 or X.dist(y, yp) > 1:
            raise InputError(f"case {t}: endpoints move by more than one")
        a, b = get((x, y)), get((xp, yp))
        for s in range(max(a.m, b.m) + 1):
            m["kappa2"] = max(m["kappa2"], X.dist(a.at(s), b.at(s)))
    return StabilityReport(not failures, m, failures)
