import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube import oracles
from stablecube.cubekernel import (
    Wallspace,
    apply_halfspace_bijection,
    delete_hyperplanes,
    dual_complex,
    l1_distance,
    linf_distance,
    median,
)
from stablecube.errors import InputError, ResourceError

from .strategies import wallspaces


def crossing_walls(n):
    """n pairwise crossing walls on the corners of an n-cube."""
    ground = list(itertools.product((0, 1), repeat=n))
    walls = [([x for x in ground if x[i] == 0], [x for x in ground if x[i] == 1]) for i in range(n)]
    return Wallspace(ground, walls)


def nested_walls(n):
    """n nested walls on 0..n: wall i splits {0..i} from {i+1..n}."""
    ground = list(range(n + 1))
    return Wallspace(ground, [(ground[:i + 1], ground[i + 1:]) for i in range(n)])


CUBE = dual_complex(crossing_walls(3))
CHAIN = dual_complex(nested_walls(5))


class TestWallspace:
    def test_degenerate_wall_rejected(self):
        with pytest.raises(InputError):
            Wallspace([0, 1], [([0, 1], [])])

    def test_non_partition_rejected(self):
        with pytest.raises(InputError):
            Wallspace([0, 1, 2], [([0], [1])])

    def test_duplicate_rejected(self):
        with pytest.raises(InputError):
            Wallspace([0, 1, 2], [([0], [1, 2]), ([1, 2], [0])])

    def test_json_roundtrip(self):
        ws = nested_walls(3)
        again = Wallspace.from_json(ws.to_json())
        assert again.walls == ws.walls


class TestDualComplex:
    def test_three_crossing_walls_give_a_cube(self):
        assert len(CUBE.vertices) == 8
        assert CUBE.dimension() == 3

    def test_nested_chain_gives_a_path(self):
        assert len(CHAIN.vertices) == 6
        assert CHAIN.dimension() == 1
        assert all(len(CHAIN.neighbors(v)) <= 2 for v in CHAIN.vertices)

    def test_mixed_system_matches_enumeration(self):
        # two crossing walls on the corners of a square, plus one wall nested in a side of the first
        ground = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
        walls = [
            ([g for g in ground if g[0] == 0], [g for g in ground if g[0] > 0]),
            ([g for g in ground if g[1] == 0], [g for g in ground if g[1] == 1]),
            ([g for g in ground if g[0] < 2], [g for g in ground if g[0] == 2]),
        ]
        ws = Wallspace(ground, walls)
        assert dual_complex(ws).vertices == oracles.coherent_orientations(ws)
        assert len(dual_complex(ws).vertices) == 6

    def test_wall_bound(self):
        with pytest.raises(ResourceError):
            dual_complex(nested_walls(25))

    @given(wallspaces())
    def test_vertices_match_enumeration(self, ws):
        assert dual_complex(ws).vertices == oracles.coherent_orientations(ws)

    @given(wallspaces())
    def test_median_graph(self, ws):
        ok, witness = oracles.is_median_graph(dual_complex(ws).vertices)
        assert ok, witness

    @given(wallspaces())
    def test_crossing_table_matches_sets(self, ws):
        cc = dual_complex(ws)
        for i, j in itertools.combinations(range(cc.n), 2):
            assert cc.crosses(i, j) == oracles.walls_cross(ws, i, j)


class TestMetrics:
    def test_cube_corners(self):
        assert l1_distance(CUBE, 0b000, 0b111) == 3
        assert linf_distance(CUBE, 0b000, 0b111) == 1

    def test_adjacent(self):
        assert l1_distance(CUBE, 0b000, 0b010) == 1

    def test_chain_ends(self):
        a, b = min(CHAIN.vertices), max(CHAIN.vertices)
        assert linf_distance(CHAIN, a, b) == 5

    @given(wallspaces())
    def test_l1_is_skeleton_distance(self, ws):
        cc = dual_complex(ws)
        D = oracles.skeleton_distances(cc.vertices)
        for x, y in itertools.combinations(sorted(cc.vertices), 2):
            assert l1_distance(cc, x, y) == D[x][y]

    @given(wallspaces(max_walls=8))
    def test_linf_is_cube_move_distance(self, ws):
        cc = dual_complex(ws)
        D = oracles.cube_move_distances(ws, cc.vertices)
        for x, y in itertools.combinations(sorted(cc.vertices), 2):
            assert linf_distance(cc, x, y) == D[x][y]

    @given(wallspaces())
    def test_metric_comparison(self, ws):
        cc = dual_complex(ws)
        dim = cc.dimension()
        for x, y in itertools.combinations(sorted(cc.vertices), 2):
            dinf, d1 = linf_distance(cc, x, y), l1_distance(cc, x, y)
            assert dinf <= d1 <= dim * dinf


class TestMedian:
    def test_repeated_argument(self):
        assert median(CUBE, 0b101, 0b101, 0b010) == 0b101

    def test_square_corners(self):
        sq = dual_complex(crossing_walls(2))
        assert median(sq, 0b00, 0b10, 0b01) == 0b00

    @given(wallspaces(), st.data())
    def test_minimises_total_distance(self, ws, data):
        cc = dual_complex(ws)
        verts = sorted(cc.vertices)
        x, y, z = (data.draw(st.sampled_from(verts)) for _ in range(3))
        m = median(cc, x, y, z)
        assert m in cc.vertices
        total = [l1_distance(cc, v, x) + l1_distance(cc, v, y) + l1_distance(cc, v, z) for v in verts]
        assert l1_distance(cc, m, x) + l1_distance(cc, m, y) + l1_distance(cc, m, z) == min(total)


class TestDeletion:
    def test_delete_all(self):
        out, res = delete_hyperplanes(CUBE, range(3))
        assert out.vertices == frozenset([0])

    def test_cube_to_square(self):
        out, res = delete_hyperplanes(CUBE, [1])
        assert len(out.vertices) == 4
        assert all(len([v for v in CUBE.vertices if res[v] == w]) == 2 for w in out.vertices)

    def test_chain_middle(self):
        out, res = delete_hyperplanes(CHAIN, [2])
        assert len(out.vertices) == 5
        order = sorted(CHAIN.vertices, key=lambda v: bin(v).count("1"))
        images = [bin(res[v]).count("1") for v in order]
        assert images == sorted(images)

    @given(wallspaces(), st.data())
    def test_deletions_compose(self, ws, data):
        cc = dual_complex(ws)
        G = data.draw(st.sets(st.sampled_from(cc.labels), max_size=cc.n))
        Gp = data.draw(st.sets(st.sampled_from(cc.labels), max_size=cc.n))
        first, r1 = delete_hyperplanes(cc, G)
        second, r2 = delete_hyperplanes(first, Gp - G)
        both, r12 = delete_hyperplanes(cc, G | Gp)
        assert second.labels == both.labels
        assert all(r2[r1[v]] == r12[v] for v in cc.vertices)


class TestHalfspaceBijection:
    @staticmethod
    def identity(cc):
        return {(lab, s): (lab, s) for lab in cc.labels for s in (0, 1)}

    def test_identity(self):
        r = apply_halfspace_bijection(CUBE, CUBE, self.identity(CUBE))
        assert r.ok and all(r.vertex_map[v] == v for v in CUBE.vertices)

    def test_swap_in_a_square(self):
        sq = dual_complex(crossing_walls(2))
        iota = {(0, s): (1, s) for s in (0, 1)} | {(1, s): (0, s) for s in (0, 1)}
        r = apply_halfspace_bijection(sq, sq, iota)
        assert r.ok
        assert r.vertex_map[0b01] == 0b10

    def test_broken_disjointness_is_named(self):
        # reversing one wall of a nested chain makes two disjoint halfspaces meet
        iota = self.identity(CHAIN)
        iota[(0, 0)], iota[(0, 1)] = (0, 1), (0, 0)
        r = apply_halfspace_bijection(CHAIN, CHAIN, iota)
        assert not r.ok
        assert r.reason == "disjointness"
        assert 0 in (r.violation[0][0], r.violation[1][0])

    def test_non_bijection(self):
        iota = self.identity(CUBE)
        iota[(0, 0)] = (1, 0)
        with pytest.raises(InputError):
            apply_halfspace_bijection(CUBE, CUBE, iota)


def test_export_formats():
    js = CUBE.to_json()
    assert sorted(js["vertices"]) == sorted(format(v, "03b")[::-1] for v in CUBE.vertices)
    assert CUBE.to_dot().count("--") == 12
