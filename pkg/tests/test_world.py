import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cogscript.world import (COLORS, SHAPES, DimensionMismatch, Scene, SceneError, is_solved,
                             match_objects, matched_targets, obj)


def S(*objs, w=6, h=6):
    return Scene(w, h, tuple(objs))


def brute_max_matching(work, target, held, by_id):
    ws = [o for o in work.objects if o.id != held]
    ts = list(target.objects)
    best = 0
    # every injective partial assignment of work objects to targets
    for k in range(min(len(ws), len(ts)), 0, -1):
        for wsub in itertools.combinations(ws, k):
            for tsub in itertools.permutations(ts, k):
                if all(a.props() == b.props() and (not by_id or a.id == b.id)
                       for a, b in zip(wsub, tsub)):
                    return k
    return best


class TestMatchObjects:
    def test_identity(self):
        s = S(obj(0, "square", "red", 0, 0))
        r = match_objects(s, s)
        assert r.pairing == {0: 0}
        assert r.matched_work_ids == {0} and r.matched_target_ids == {0}

    def test_no_admissible_pair(self):
        r = match_objects(S(obj(0, "square", "red", 2, 2)), S(obj(0, "square", "red", 0, 0)))
        assert len(r) == 0

    def test_swapped_identical_objects(self):
        work = S(obj(0, "square", "red", 1, 1), obj(1, "square", "red", 3, 3))
        target = S(obj(0, "square", "red", 3, 3), obj(1, "square", "red", 1, 1))
        assert match_objects(work, target, mode="by_property").pairing == {0: 1, 1: 0}
        assert len(match_objects(work, target, mode="by_id")) == 0
        assert brute_max_matching(work, target, None, False) == 2
        assert brute_max_matching(work, target, None, True) == 0

    def test_held_object_excluded(self):
        work = S(obj(0, "square", "red", 1, 1), obj(1, "square", "red", 3, 3))
        target = S(obj(0, "square", "red", 3, 3), obj(1, "square", "red", 1, 1))
        r = match_objects(work, target, held_id=0)
        assert r.matched_work_ids == {1}
        assert brute_max_matching(work, target, 0, False) == 1

    def test_color_and_shape_must_agree(self):
        work = S(obj(0, "square", "red", 1, 1), obj(1, "circle", "blue", 2, 2))
        target = S(obj(0, "square", "green", 1, 1), obj(1, "star", "blue", 2, 2))
        assert len(match_objects(work, target)) == 0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            match_objects(S(w=3, h=3), S(w=4, h=3))

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            match_objects(S(), S(), mode="fuzzy")


class TestIsSolved:
    def test_identical(self):
        s = S(obj(0, "star", "yellow", 4, 1))
        assert is_solved(s, s)

    def test_held_blocks(self):
        s = S(obj(0, "star", "yellow", 4, 1))
        assert not is_solved(s, s, held_id=0)

    def test_missing_object(self):
        a = S(obj(0, "star", "yellow", 4, 1))
        b = S(obj(0, "star", "yellow", 4, 1), obj(1, "circle", "red", 0, 0))
        assert not is_solved(a, b)

    def test_empty_scenes(self):
        assert is_solved(S(), S())


class TestSceneValidation:
    def test_overlap(self):
        with pytest.raises(SceneError):
            S(obj(0, "square", "red", 1, 1), obj(1, "circle", "red", 1, 1))

    def test_duplicate_id(self):
        with pytest.raises(SceneError):
            S(obj(0, "square", "red", 1, 1), obj(0, "circle", "red", 2, 1))

    def test_out_of_bounds(self):
        with pytest.raises(SceneError):
            S(obj(0, "square", "red", 6, 0))

    def test_bad_palette(self):
        with pytest.raises(SceneError):
            S(obj(0, "hexagon", "red", 0, 0))
        with pytest.raises(SceneError):
            S(obj(0, "square", "purple", 0, 0))

    def test_zero_size(self):
        with pytest.raises(SceneError):
            Scene(0, 3)

    def test_dict_round_trip(self):
        s = S(obj(3, "triangle", "blue", 5, 2), obj(1, "square", "red", 0, 4))
        assert Scene.from_dict(s.to_dict()) == s


# small grids keep collisions (and therefore matches) common
small = 3


@st.composite
def scenes(draw, max_objects=5):
    cells = draw(st.lists(st.tuples(st.integers(0, small - 1), st.integers(0, small - 1)),
                          unique=True, max_size=max_objects))
    ids = draw(st.permutations(range(len(cells))))
    objs = [obj(i, draw(st.sampled_from(SHAPES[:2])), draw(st.sampled_from(COLORS[:2])), x, y)
            for i, (x, y) in zip(ids, cells)]
    return Scene(small, small, tuple(objs))


@st.composite
def held_ids(draw, scene):
    return draw(st.sampled_from([None] + [o.id for o in scene.objects]))


class TestMatchingProperties:
    @settings(max_examples=300, deadline=None)
    @given(scenes(), scenes(), st.data())
    def test_brute_force_equivalence(self, a, b, data):
        held = data.draw(held_ids(a))
        for mode, by_id in (("by_property", False), ("by_id", True)):
            r = match_objects(a, b, held, mode)
            assert len(r) == brute_max_matching(a, b, held, by_id)
            assert r.matched_target_ids == matched_targets(a, b, held, mode)
            for w, t in r.pairing.items():
                wo, to = a.get(w), b.get(t)
                assert wo.props() == to.props()
                assert not by_id or w == t
            assert len(set(r.pairing.values())) == len(r.pairing)

    @settings(max_examples=200, deadline=None)
    @given(scenes(), scenes())
    def test_symmetric_cardinality(self, a, b):
        assert len(match_objects(a, b)) == len(match_objects(b, a))

    @settings(max_examples=200, deadline=None)
    @given(scenes(), scenes(), st.data())
    def test_release_never_decreases(self, a, b, data):
        held = data.draw(held_ids(a))
        assert len(match_objects(a, b, held)) <= len(match_objects(a, b, None))

    @settings(max_examples=200, deadline=None)
    @given(scenes(), scenes())
    def test_by_id_at_most_by_property(self, a, b):
        assert len(match_objects(a, b, mode="by_id")) <= len(match_objects(a, b))

    @settings(max_examples=100, deadline=None)
    @given(scenes(), scenes())
    def test_deterministic(self, a, b):
        assert match_objects(a, b).pairing == match_objects(a, b).pairing
