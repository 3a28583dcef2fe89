import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube.errors import InputError, ParameterError, PreconditionError
from stablecube.generators import perturb
from stablecube.geomgraph import path_graph, star_graph
from stablecube.hhsmodel import (
    HHSInstance,
    distance_formula_ratio,
    hull_density,
    hull_mask,
    hull_theta,
    involved_domains,
    path_reflection,
    rel_domains,
    rel_set,
    rel_symmetric_difference,
    segmented_path_hhs,
    tree_product_hhs,
    trivial_hhs,
    validate_instance,
)

from .strategies import seeds, trees

SEGMENTS = [(10, 20), (30, 45)]


def segmented():
    return segmented_path_hhs(60, SEGMENTS)


class TestConstruction:
    def test_trivial_has_one_domain(self):
        h = trivial_hhs(path_graph(5))
        assert h.domains == ("S",)
        assert h.kappa0 == 0

    def test_product_relations(self):
        h = tree_product_hhs([path_graph(3), path_graph(2)])
        assert h.orthogonal("V1", "V2")
        assert h.properly_nested("V1", "S")
        assert not h.orthogonal("V1", "S")

    def test_three_factor_product_has_containers(self):
        h = tree_product_hhs([path_graph(2)] * 3)
        assert set(h.domains) == {"V1", "V2", "V3", "V12", "V13", "V23", "S"}
        assert h.orthogonal("V12", "V3")

    def test_product_rejects_non_trees(self):
        from stablecube.geomgraph import cycle_graph
        with pytest.raises(InputError):
            tree_product_hhs([cycle_graph(4), path_graph(2)])

    def test_segments_must_be_interior(self):
        with pytest.raises(InputError):
            segmented_path_hhs(20, [(0, 5)])

    def test_missing_relative_projection(self):
        h = segmented()
        data = h.to_json()
        data["rho"] = [r for r in data["rho"] if r[0] != "U1" or r[1] != "S"]
        with pytest.raises(InputError):
            HHSInstance.from_json(data)

    def test_json_roundtrip(self):
        h = segmented()
        again = HHSInstance.from_json(json.loads(json.dumps(h.to_json())))
        assert again.to_json() == h.to_json()
        assert validate_instance(again).passed


class TestValidation:
    def test_trivial_passes(self):
        rep = validate_instance(trivial_hhs(path_graph(30)))
        assert rep.passed, rep.failures()

    def test_tree_product_passes(self):
        rep = validate_instance(tree_product_hhs([path_graph(6), star_graph(3, 2)]))
        assert rep.passed, rep.failures()

    def test_three_factor_product_passes(self):
        rep = validate_instance(tree_product_hhs([path_graph(3), path_graph(2), path_graph(2)]))
        assert rep.passed, rep.failures()

    def test_segmented_path_passes(self):
        rep = validate_instance(segmented())
        assert rep.passed, rep.failures()

    def test_corrupted_nested_projection_is_caught(self):
        h = segmented()
        h.rho[("U1", "S")] = 30
        rep = validate_instance(h)
        assert "nested_consistency" in rep.failures()
        assert rep.items["bounded_geodesic_image"].witness[:2] == ("U1", "S")

    def test_corrupted_transverse_projection_is_caught(self):
        h = segmented()
        h.rho[("U1", "U2")] = 15
        assert "transverse_consistency" in validate_instance(h).failures()

    def test_report_is_json(self):
        json.dumps(validate_instance(segmented()).to_json())

    @given(trees(min_n=3, max_n=8), trees(min_n=3, max_n=8))
    def test_random_tree_products_pass(self, a, b):
        rep = validate_instance(tree_product_hhs([a, b]), samples=16)
        assert rep.passed, rep.failures()


class TestRelevance:
    K = 1

    def test_ordered_by_colour(self):
        assert rel_domains(segmented(), 0, 60, self.K) == {0: ["S"], 1: ["U1", "U2"]}

    def test_order_reverses_with_the_endpoints(self):
        assert rel_domains(segmented(), 60, 0, self.K)[1] == ["U2", "U1"]

    def test_threshold_must_exceed_ten_theta(self):
        with pytest.raises(ParameterError):
            rel_domains(segmented(), 0, 60, 0)

    def test_rel_set_and_nesting(self):
        U, sub = rel_set(segmented(), [0, 60, 25], self.K)
        assert U == frozenset(["S", "U1", "U2"])
        assert sub["U1"] == frozenset(["U1"])
        assert sub["S"] == U

    def test_close_to_one_segment(self):
        U, _ = rel_set(segmented(), [12, 13], self.K)
        assert U == frozenset()

    def test_symmetric_difference_of_shifted_ends(self):
        sizes, bound = rel_symmetric_difference(segmented(), [0, 60], [1, 59], self.K)
        assert sizes == {0: 0, 1: 0}
        assert bound == 32

    def test_involved_domains(self):
        assert involved_domains(segmented(), [0, 60], [1, 60], self.K) == frozenset(["S"])

    def test_involved_needs_close_inputs(self):
        with pytest.raises(PreconditionError):
            involved_domains(segmented(), [0], [5], self.K)

    @given(st.lists(st.integers(0, 60), min_size=1, max_size=4, unique=True), seeds,
           st.sampled_from(["move-one", "move-all", "resample-within-1"]))
    def test_rel_changes_by_at_most_eight_size_squared(self, F, seed, mode):
        h = segmented()
        Fp = perturb(h.X, F, seed, mode)
        sizes, bound = rel_symmetric_difference(h, F, Fp, self.K)
        assert all(v <= bound for v in sizes.values())


class TestHull:
    def test_segmented_interval(self):
        assert hull_theta(segmented(), [12, 40], 0) == frozenset(range(12, 41))

    def test_product_box(self):
        h = tree_product_hhs([path_graph(4), path_graph(4)])
        box = hull_theta(h, [(0, 0), (2, 3)], 0)
        assert box == frozenset((i, j) for i in range(3) for j in range(4))

    @given(st.lists(st.integers(0, 60), min_size=1, max_size=4, unique=True))
    def test_contains_inputs_and_is_dense(self, F):
        h = segmented()
        m = hull_mask(h, F, 0)
        assert all(m[h.X.idx(x)] for x in F)
        assert hull_density(h, F, 0) == 0


class TestDistanceFormula:
    def test_segmented_path_is_exact(self):
        out = distance_formula_ratio(segmented(), 1)
        assert (out["ratio_min"], out["ratio_max"], out["C"]) == (1.0, 1.0, 0.0)

    def test_product_is_exact(self):
        h = tree_product_hhs([path_graph(5), star_graph(3, 2)])
        out = distance_formula_ratio(h, 1)
        assert out["K"] == 1.0 and out["zero_pairs_consistent"]

    def test_large_threshold_drops_short_pairs(self):
        # every term of a short pair is truncated, so the sum vanishes while d_X does not
        out = distance_formula_ratio(segmented(), 100, pairs=[(0, 3)])
        assert not out["zero_pairs_consistent"]


def test_reflection():
    h = trivial_hhs(path_graph(10))
    g = path_reflection(h)
    assert g.point(h, 3) == 7
    assert g.points(h, [0, 4]) == {10, 6}
    assert np.array_equal(g.x_map[g.x_map], np.arange(h.X.n))
