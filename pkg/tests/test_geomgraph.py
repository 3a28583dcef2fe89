from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube import oracles
from stablecube.errors import InputError, ResourceError
from stablecube.geomgraph import (
    MetricGraph,
    ProductGraph,
    cycle_graph,
    delta_estimate,
    delta_sampled,
    grid_graph,
    hausdorff_distance,
    path_graph,
    star_graph,
    steiner_network,
    weak_hull,
)

from .strategies import small_graphs, trees, vertex_subsets


class TestDistances:
    def test_path_end_to_end(self):
        assert path_graph(3).dist(0, 3) == 3

    def test_zero_on_diagonal(self):
        g = grid_graph(3, 2)
        assert all(g.dist(v, v) == 0 for v in g.vertices)

    def test_square_opposite_corners(self):
        assert cycle_graph(4).dist(0, 2) == 2

    def test_unknown_vertex(self):
        with pytest.raises(InputError):
            path_graph(3).dist(0, 17)

    def test_disconnected_graph_rejected(self):
        with pytest.raises(InputError):
            MetricGraph([0, 1, 2], [(0, 1)])

    @given(small_graphs())
    def test_rows_match_reference_bfs(self, g):
        adj = oracles.graph_adjacency(g)
        for v in g.vertices[:4]:
            ref = oracles.bfs(adj, v)
            row = g.row(g.idx(v))
            assert all(row[g.idx(w)] == d for w, d in ref.items())

    def test_product_metric_is_l1(self):
        X = ProductGraph([path_graph(4), path_graph(3)])
        assert X.dist((0, 0), (4, 3)) == 7
        assert X.dist((1, 2), (3, 0)) == 4


class TestWeakHull:
    def test_tree_two_leaves_gives_the_geodesic(self):
        g = star_graph(3, 4)
        assert weak_hull(g, [4, 8]) == frozenset([0, 1, 2, 3, 4, 5, 6, 7, 8])

    def test_square_opposite_pair_gives_everything(self):
        assert weak_hull(cycle_graph(4), [0, 2]) == frozenset(range(4))

    def test_singleton(self):
        assert weak_hull(path_graph(5), [3]) == frozenset([3])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            weak_hull(path_graph(5), [])

    @given(st.data())
    def test_matches_geodesic_filter(self, data):
        g = data.draw(small_graphs())
        F = data.draw(vertex_subsets(g))
        assert weak_hull(g, F) == oracles.geodesic_vertices(g, F)


class TestHyperbolicity:
    @given(trees())
    def test_trees_are_zero_hyperbolic(self, T):
        assert delta_estimate(T) == 0

    def test_square_matches_four_point_scan(self):
        g = cycle_graph(4)
        assert delta_estimate(g) == Fraction(1)
        assert float(delta_estimate(g)) == oracles.four_point_delta(g)

    def test_single_vertex(self):
        assert delta_estimate(MetricGraph([0], [])) == 0

    @given(small_graphs())
    def test_matches_exhaustive_scan(self, g):
        assert float(delta_estimate(g)) == oracles.four_point_delta(g)

    @given(small_graphs())
    def test_sampling_is_a_lower_bound(self, g):
        assert delta_sampled(g, samples=200) <= delta_estimate(g)

    def test_refuses_large_graphs(self):
        with pytest.raises(ResourceError):
            delta_estimate(cycle_graph(200))


class TestSteiner:
    def test_path_ends(self):
        net = steiner_network(path_graph(9), [[0], [9]])
        assert net.total_length == 9
        assert net.vertices == frozenset(range(10))

    def test_star_three_leaves(self):
        g = star_graph(3, 1)
        net = steiner_network(g, [[1], [2], [3]])
        assert net.total_length == 3
        assert net.vertices == frozenset(range(4))

    def test_square_opposite_pair_takes_least_geodesic(self):
        net = steiner_network(cycle_graph(4), [[0], [2]])
        assert net.edges == ((0, 1), (1, 2))

    def test_empty_terminal_list(self):
        with pytest.raises(InputError):
            steiner_network(path_graph(3), [])

    def test_terminal_sets_are_contracted(self):
        g = path_graph(10)
        net = steiner_network(g, [[0, 1, 2], [8, 9, 10]])
        assert net.total_length == 6
        assert net.collapsed_is_tree()

    @given(st.data())
    def test_minimal_against_subset_enumeration(self, data):
        g = data.draw(small_graphs(max_n=10))
        F = data.draw(vertex_subsets(g, min_size=2, max_size=5))
        net = steiner_network(g, [[x] for x in F])
        assert net.total_length == oracles.steiner_size(g, F)
        assert net.collapsed_is_tree()

    @given(st.data())
    def test_terminal_sets_collapse_to_a_tree(self, data):
        g = data.draw(small_graphs(max_n=12))
        pts = data.draw(vertex_subsets(g, min_size=2, max_size=6))
        split = data.draw(st.integers(1, len(pts) - 1))
        net = steiner_network(g, [pts[:split], pts[split:]])
        assert net.collapsed_is_tree()

    def test_deterministic(self):
        g = grid_graph(3, 3)
        a = steiner_network(g, [[(0, 0)], [(3, 3)], [(0, 3)]])
        b = steiner_network(g, [[(0, 3)], [(0, 0)], [(3, 3)]])
        assert a.edges == b.edges


class TestHausdorff:
    def test_shifted_sets(self):
        g = path_graph(10)
        assert hausdorff_distance(g, [0, 10], [1, 10]) == 1
        assert hausdorff_distance(g, [0], [0, 4]) == 4

    def test_symmetric(self):
        g = grid_graph(4, 4)
        A, B = [(0, 0), (4, 1)], [(2, 2)]
        assert hausdorff_distance(g, A, B) == hausdorff_distance(g, B, A)


def test_json_roundtrip():
    g = grid_graph(2, 3)
    h = MetricGraph.from_json(g.to_json())
    assert h.vertices == g.vertices
    assert np.array_equal(h.table(), g.table())
