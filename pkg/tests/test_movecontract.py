import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube.cubekernel import dual_complex, linf_distance
from stablecube.errors import InputError
from stablecube.movecontract import (
    barycentric_cube,
    classify_walls,
    move_sequence,
    move_step,
    separating_walls,
    verify_contraction,
)

from .strategies import wallspaces
from .test_cubekernel import CHAIN, CUBE


def chain_vertex(k):
    """Vertex of the nested chain sitting at ground point k."""
    return (1 << k) - 1


@st.composite
def configurations(draw, max_walls=10, max_size=5):
    cc = dual_complex(draw(wallspaces(max_walls=max_walls)))
    verts = sorted(cc.vertices)
    f = tuple(draw(st.lists(st.sampled_from(verts), min_size=1, max_size=max_size)))
    return cc, f


class TestClassification:
    def test_chain_ends(self):
        cls = classify_walls(CHAIN, (chain_vertex(0), chain_vertex(5)))
        assert cls.Hf == frozenset(range(5))
        assert cls.ext == cls.trans == frozenset([0, 4])
        assert cls.p0 == {0: frozenset([0]), 4: frozenset([1])}

    def test_cube_diagonal_is_extremal_but_not_transitional(self):
        cls = classify_walls(CUBE, (0b000, 0b111))
        assert cls.ext == frozenset(range(3))
        assert cls.trans == frozenset()

    def test_single_point(self):
        assert separating_walls(CHAIN, (chain_vertex(2),)) == frozenset()

    def test_empty_configuration(self):
        with pytest.raises(InputError):
            move_sequence(CHAIN, ())


class TestMoveSequence:
    def test_chain_ends_meet_in_the_middle(self):
        seq = move_sequence(CHAIN, (chain_vertex(0), chain_vertex(5)))
        assert seq == [(0, 31), (1, 15), (3, 7)]

    def test_repeated_points_move_together(self):
        f = (chain_vertex(0), chain_vertex(5), chain_vertex(1))
        assert move_sequence(CHAIN, f) == [(0, 31, 1), (1, 15, 1), (3, 7, 3)]

    def test_cube_is_already_contracted(self):
        assert move_sequence(CUBE, (0b000, 0b111)) == [(0b000, 0b111)]

    def test_one_step(self):
        assert move_step(CHAIN, (chain_vertex(1), chain_vertex(4))) == (chain_vertex(2), chain_vertex(3))

    def test_barycentric_cube_on_the_chain(self):
        image, rep = barycentric_cube(CHAIN, (chain_vertex(0), chain_vertex(5), chain_vertex(1)))
        assert image == frozenset([3, 7])
        assert rep == 3

    def test_barycentric_cube_tie_goes_to_side_zero(self):
        image, rep = barycentric_cube(CUBE, (0b000, 0b111))
        assert image == frozenset([0b000, 0b111])
        assert rep == 0b000


class TestVerification:
    def test_chain_report(self):
        rep = verify_contraction(CHAIN, (chain_vertex(0), chain_vertex(5)), deletions=[2, 0], surjection=[0, 1, 1])
        assert rep.passed, rep.items
        assert rep.n == 2
        assert rep.measured["max_fellow_travel"] <= 1

    def test_non_crossing_deletion_rejected(self):
        with pytest.raises(InputError):
            verify_contraction(CHAIN, (chain_vertex(0), chain_vertex(5)), deletions=[(1, 2)])

    def test_surjection_must_hit_everything(self):
        with pytest.raises(InputError):
            verify_contraction(CHAIN, (chain_vertex(0), chain_vertex(5)), surjection=[0, 0])

    @given(configurations())
    def test_contraction_properties(self, case):
        cc, f = case
        rep = verify_contraction(cc, f)
        assert rep.passed, {k: v for k, v in rep.items.items() if not v[0]}

    @given(configurations())
    def test_final_configuration_lies_in_a_cube(self, case):
        cc, f = case
        final = move_sequence(cc, f)[-1]
        assert all(linf_distance(cc, a, b) <= 1 for a, b in itertools.combinations(final, 2))
        assert not classify_walls(cc, final).trans

    @given(configurations(), st.data())
    def test_single_wall_deletion(self, case, data):
        cc, f = case
        h = data.draw(st.integers(0, cc.n - 1))
        rep = verify_contraction(cc, f, deletions=[h], structure=False)
        assert rep.passed, {k: v for k, v in rep.items.items() if not v[0]}

    @given(configurations(), st.data())
    def test_crossing_set_deletion(self, case, data):
        cc, f = case
        pairs = [(a, b) for a, b in itertools.combinations(range(cc.n), 2) if cc.crosses(a, b)]
        G = data.draw(st.sampled_from(pairs)) if pairs else (0,)
        rep = verify_contraction(cc, f, deletions=[G], structure=False)
        assert rep.passed, {k: v for k, v in rep.items.items() if not v[0]}

    @given(configurations(max_size=3), st.data())
    def test_depends_only_on_the_image(self, case, data):
        cc, f = case
        extra = data.draw(st.lists(st.integers(0, len(f) - 1), max_size=3))
        order = data.draw(st.permutations(list(range(len(f))) + extra))
        rep = verify_contraction(cc, f, surjection=order, structure=False)
        assert rep.items["image_dependence"][0]

    @given(configurations())
    def test_length_bounded_by_separating_walls(self, case):
        cc, f = case
        assert len(move_sequence(cc, f)) - 1 <= len(separating_walls(cc, f))
