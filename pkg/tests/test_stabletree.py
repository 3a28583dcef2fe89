import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube.errors import InputError, ParameterError, PreconditionError
from stablecube.generators import perturb, random_graph
from stablecube.geomgraph import path_graph, star_graph, steiner_network, weak_hull
from stablecube.stabletree import (
    StableTreeParams,
    branching_bound,
    build_clusters,
    build_stable_tree,
    classify_clusters,
    compare_stable_trees,
    separation_graph,
    shadow,
    tree_diagnostics,
)

from .strategies import seeds, trees, vertex_subsets

LINE = path_graph(100)
LINE_F = [0, 100]
LINE_Y = [30, 34, 70]
LINE_PARAMS = StableTreeParams(eps=1, eps_prime=1, E=8)


class TestClusters:
    def test_far_pair_gives_two_singletons(self):
        cg = build_clusters(path_graph(20), [0, 20], [], E=8)
        assert cg.clusters == (frozenset([0]), frozenset([20]))

    def test_close_points_form_one_cluster(self):
        cg = build_clusters(path_graph(20), [0, 5], [3, 8], E=8)
        assert cg.clusters == (frozenset([0, 3, 5, 8]),)

    def test_line_instance(self):
        cg = build_clusters(LINE, LINE_F, LINE_Y, E=8)
        assert cg.clusters == (frozenset([0]), frozenset([30, 34]), frozenset([70]), frozenset([100]))

    def test_empty_F(self):
        with pytest.raises(InputError):
            build_clusters(LINE, [], [3], E=8)


class TestSeparation:
    def test_two_clusters_are_joined(self):
        cg = build_clusters(LINE, [0, 100], [], E=20)
        sg = separation_graph(LINE, cg, 2, [0, 100])
        assert sg.edges == frozenset([(0, 1)])

    def test_collinear_middle_separates_the_ends(self):
        cg = build_clusters(LINE, [0, 50, 100], [], E=20)
        sg = separation_graph(LINE, cg, 2, [0, 50, 100])
        assert sg.edges == frozenset([(0, 1), (1, 2)])

    def test_star_leaves_form_a_triangle(self):
        g = star_graph(3, 40)
        F = [40, 80, 120]
        cg = build_clusters(g, F, [], E=20)
        sg = separation_graph(g, cg, 2, F)
        assert sg.edges == frozenset([(0, 1), (0, 2), (1, 2)])

    def test_needs_E_above_four_eps_prime(self):
        cg = build_clusters(LINE, [0, 100], [], E=8)
        with pytest.raises(ParameterError):
            separation_graph(LINE, cg, 2, [0, 100])

    def test_middle_cluster_without_F_is_interior(self):
        cg = build_clusters(LINE, [0, 100], [50], E=20)
        sg = separation_graph(LINE, cg, 2, [0, 100])
        assert sg.e0 == frozenset([1])

    def test_every_cluster_with_F_point_means_no_interior(self):
        cg = build_clusters(LINE, [0, 50, 100], [], E=20)
        assert separation_graph(LINE, cg, 2, [0, 50, 100]).e0 == frozenset()

    def test_chain_of_interior_clusters_is_a_path_in_order(self):
        Y = [20, 40, 60, 80]
        cg = build_clusters(LINE, [0, 100], Y, E=12)
        sg = separation_graph(LINE, cg, 2, [0, 100])
        assert sg.edges == frozenset((i, i + 1) for i in range(5))
        assert classify_clusters(LINE, sg, cg, steiner_network(LINE, [[0], [100]]), 1, [0, 100])["e0_chain_order"]


class TestShadow:
    lam = steiner_network(LINE, [[0], [100]])

    def test_single_vertex(self):
        assert shadow(LINE, self.lam, [42], 0) == frozenset([42])

    def test_terminals_span_the_network(self):
        assert shadow(LINE, self.lam, [0, 100], 0) == frozenset(range(101))

    def test_line_cluster(self):
        assert shadow(LINE, self.lam, [30, 34], 2) == frozenset(range(28, 37))


class TestStableTree:
    def test_two_points_give_an_interval(self):
        g = path_graph(100)
        T = build_stable_tree(g, [0, 100], params=StableTreeParams(eps=1, eps_prime=1, E=8))
        assert T.is_tree
        assert sorted(T.xi) == list(range(101))
        segs = T.te_segments()
        assert len(segs) == 1 and [T.xi[a] for a in segs[0]] == list(range(101))
        assert all(len(n) == 1 for n in T.cluster_nodes.values())

    def test_single_cluster_has_no_te(self):
        g = path_graph(20)
        T = build_stable_tree(g, [0, 5, 9], params=StableTreeParams(eps=1, eps_prime=1, E=10))
        assert not T.te_nodes()
        assert sorted(T.xi) == list(range(10))

    def test_line_instance_shape(self):
        T = build_stable_tree(LINE, LINE_F, LINE_Y, LINE_PARAMS)
        assert T.is_tree and T.branching() == 0
        assert [sorted(T.xi[a] for a in s) for s in T.cluster_nodes.values()] == [
            [0], [30, 31, 32, 33, 34], [70], [100]]
        assert [(T.xi[s[0]], T.xi[s[-1]]) for s in T.te_segments()] == [(0, 30), (34, 70), (70, 100)]

    def test_empty_F(self):
        with pytest.raises(InputError):
            build_stable_tree(LINE, [])

    def test_derived_parameters(self):
        T = build_stable_tree(path_graph(10), [0, 10])
        assert (T.params.delta, T.params.eps, T.params.eps_prime, T.params.E) == (0, 4, 8, 64)

    @given(st.data())
    def test_tree_invariants_on_random_graphs(self, data):
        g = random_graph(data.draw(st.integers(15, 40)), 3, 4, data.draw(seeds))
        F = data.draw(vertex_subsets(g, min_size=2, max_size=5))
        Y = data.draw(vertex_subsets(g, min_size=0, max_size=3)) if data.draw(st.booleans()) else []
        T = build_stable_tree(g, F, Y, StableTreeParams(eps=2, eps_prime=2, E=9))
        assert T.is_tree
        assert T.branching() <= branching_bound(len(set(F)))
        assert all(T.xi[a] in T.F | T.Y for a in T.leaves())
        assert T.separation.connected
        rep = classify_clusters(g, T)
        assert rep["non_e0_ok"]
        assert rep["shadow_overlap_leaf_free"]

    @given(trees(min_n=10, max_n=60), st.data())
    def test_image_in_a_tree_is_the_weak_hull(self, T0, data):
        F = data.draw(vertex_subsets(T0, min_size=2, max_size=4))
        T = build_stable_tree(T0, F, params=StableTreeParams(eps=1, eps_prime=1, E=5))
        assert set(T.xi) == set(weak_hull(T0, F))
        # cluster and edge networks may pass through a vertex separately,
        # which costs at most a detour through one cluster
        assert tree_diagnostics(T)["qi_additive"] <= 2 * T.params.E * len(T.F)


class TestComparison:
    def test_identical_inputs(self):
        T = build_stable_tree(LINE, LINE_F, LINE_Y, LINE_PARAMS)
        corr = compare_stable_trees(T, T, N=3)
        assert corr.exceptions == []
        assert corr.measured["complement_count"] == 0
        assert len(corr.identical) == len(T.te_segments())

    def test_moving_one_anchor(self):
        T = build_stable_tree(LINE, LINE_F, LINE_Y, LINE_PARAMS)
        Tp = build_stable_tree(LINE, LINE_F, [30, 34, 71], LINE_PARAMS)
        corr = compare_stable_trees(T, Tp, N=3)
        # the moved anchor is an interior cluster, so both components meeting it change
        assert sorted((k, kp) for k, kp, _, _ in corr.exceptions) == [(1, 1), (2, 2)]
        assert all(d == 1 for _, _, d, _ in corr.exceptions)
        assert corr.measured["complement_count"] == 0

    def test_deleting_one_anchor(self):
        T = build_stable_tree(LINE, LINE_F, LINE_Y, LINE_PARAMS)
        Tp = build_stable_tree(LINE, LINE_F, [30, 34], LINE_PARAMS)
        corr = compare_stable_trees(T, Tp, N=3)
        assert corr.measured["exceptions"] <= 2
        assert corr.measured["max_hausdorff"] <= corr.L

    def test_far_inputs_rejected(self):
        T = build_stable_tree(LINE, [0, 100], params=LINE_PARAMS)
        Tp = build_stable_tree(LINE, [0, 90], params=LINE_PARAMS)
        with pytest.raises(PreconditionError):
            compare_stable_trees(T, Tp, N=3)

    @given(st.integers(0, 2**16), st.sampled_from(["move-one", "move-all", "resample-within-1"]))
    def test_perturbed_trees_share_most_pieces(self, seed, mode):
        g = path_graph(120)
        F = [0, 60, 120]
        Fp = perturb(g, F, seed, mode)
        T = build_stable_tree(g, F, [30, 90], LINE_PARAMS)
        Tp = build_stable_tree(g, Fp, [30, 91], LINE_PARAMS)
        corr = compare_stable_trees(T, Tp, N=3)
        assert corr.measured["exceptions"] <= 3
        assert corr.measured["complement_diameter"] <= 4
