import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube.combing import (
    barycenter,
    barycenter_data,
    bicombing_path,
    path_quality,
    verify_barycenter_stability,
    verify_bicombing,
    walls_crossed_twice,
)
from stablecube.errors import InputError
from stablecube.geomgraph import path_graph
from stablecube.hhsmodel import hull_mask, path_reflection, tree_product_hhs, trivial_hhs
from stablecube.hullcubulation import CubulationParams

from .strategies import spiders
from .test_hullcubulation import SPIDER_PARAMS

LONG = trivial_hhs(path_graph(320))
SHORT = trivial_hhs(path_graph(20))
SHORT_PARAMS = CubulationParams(M=2, eps=1)


class TestBarycenter:
    def test_two_ends_of_a_long_path(self):
        assert barycenter(LONG, [0, 320]) == 144

    def test_single_point(self):
        assert barycenter(LONG, [100]) == 100

    def test_three_points(self):
        assert barycenter(LONG, [0, 320, 100]) == 148

    def test_order_does_not_matter(self):
        assert barycenter(LONG, [320, 100, 0]) == barycenter(LONG, [0, 100, 320])

    def test_empty_input(self):
        with pytest.raises(InputError):
            barycenter(LONG, [])

    def test_rectangle(self):
        h = tree_product_hhs([path_graph(200), path_graph(150)])
        assert barycenter(h, [(0, 0), (200, 150)]) == (80, 48)

    def test_reflection_moves_it_by_one_subdivision_step(self):
        g = path_reflection(LONG)
        rep = verify_barycenter_stability(LONG, [([0, 320], [0, 320], g), ([0, 320], [1, 319])])
        assert rep.passed
        assert rep.measured == {"kappa1": 32, "move_count_gap": 0}

    @given(spiders(), st.randoms(use_true_random=False))
    def test_permutation_invariant_and_in_the_hull(self, g, rnd):
        h = trivial_hhs(g)
        F = [v for v in g.vertices if len(g.adj[g.idx(v)]) == 1]
        b = barycenter_data(h, F, SPIDER_PARAMS)
        shuffled = list(F)
        rnd.shuffle(shuffled)
        assert barycenter(h, shuffled, SPIDER_PARAMS) == b.point
        assert hull_mask(h, F, 0)[h.X.idx(b.point)]
        assert b.representative in b.cube


class TestBicombing:
    def test_short_path_steps(self):
        p = bicombing_path(SHORT, 0, 20, SHORT_PARAMS)
        assert p.steps == [0, 3, 5, 7, 9, 13, 15, 17, 20]
        assert path_quality(SHORT, p)["step_max"] == 4

    def test_rectangle_path(self):
        h = tree_product_hhs([path_graph(200), path_graph(150)])
        assert bicombing_path(h, (0, 0), (200, 150)).steps == [(0, 0), (48, 48), (80, 48), (144, 80), (200, 150)]

    def test_equal_endpoints(self):
        assert bicombing_path(SHORT, 5, 5, SHORT_PARAMS).steps == [5]

    def test_adjacent_endpoints_jump(self):
        p = bicombing_path(SHORT, 0, 1, SHORT_PARAMS)
        assert p.steps == [0, 1]
        assert len(p.omega) == 2

    def test_trivial_extension(self):
        p = bicombing_path(SHORT, 0, 20, SHORT_PARAMS)
        assert p.at(100) == 20
        with pytest.raises(InputError):
            p.at(-1)

    def test_stability_report(self):
        rep = verify_bicombing(SHORT, [((0, 20), (1, 20)), ((0, 20), (0, 19))], SHORT_PARAMS)
        assert rep.passed
        assert rep.measured["kappa2"] == 2 and rep.measured["paths"] == 3

    def test_far_endpoints_rejected(self):
        with pytest.raises(InputError):
            verify_bicombing(SHORT, [((0, 20), (5, 20))], SHORT_PARAMS)

    @given(st.integers(0, 20), st.integers(0, 20))
    def test_paths_join_their_endpoints_without_recrossing(self, x, y):
        p = bicombing_path(SHORT, x, y, SHORT_PARAMS)
        assert p.steps[0] == x and p.steps[-1] == y
        assert walls_crossed_twice(p) == []
        q = path_quality(SHORT, p)
        assert q["backtrack"]["S"] == 0

    @given(spiders(), st.data())
    def test_tree_paths_are_monotone(self, g, data):
        h = trivial_hhs(g)
        x, y = (data.draw(st.sampled_from(g.vertices)) for _ in range(2))
        p = bicombing_path(h, x, y, SPIDER_PARAMS)
        assert walls_crossed_twice(p) == []
        assert path_quality(h, p)["backtrack"]["S"] <= SPIDER_PARAMS.M
