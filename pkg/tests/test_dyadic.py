import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from bmolab.dyadic import (
    Box,
    D_MINUS,
    D_PLUS,
    GridId,
    GridInterval,
    OpenSet,
    PLAIN,
    RectCollection,
    S_GRIDS,
    box_from_pairs,
    cover_in_S,
    dilate_rect,
    grid_interval_endpoints,
    interval_in_family,
    plain_interval,
    rect,
    shadow,
    shifted_family,
    shifted_membership,
    side_from_text,
    side_to_text,
    verify_grid_nesting,
)


def test_endpoints_plain():
    assert grid_interval_endpoints(PLAIN, -1, 1) == (F(1, 2), F(1))


def test_endpoints_shifted_third():
    g = GridId(1, 0, F(1, 3))
    assert grid_interval_endpoints(g, 0, 0) == (F(1, 3), F(4, 3))


def test_endpoints_shifted_fifth():
    # direct rational evaluation of 2^(kd+b)((0,1)+j+(-1)^k alpha)
    # with d=2, b=0, alpha=1/5, k=1, j=0: sign (-1)^1 = -1
    g = GridId(2, 0, F(1, 5))
    assert grid_interval_endpoints(g, 1, 0) == (F(-4, 5), F(16, 5))


def test_endpoint_length_invariant():
    for d in range(1, 4):
        for g in shifted_family(d):
            for k in (-3, -1, 0, 2):
                for j in (-2, 0, 5):
                    lo, hi = grid_interval_endpoints(g, k, j)
                    assert hi - lo == F(2) ** (k * g.d + g.b)


def test_gridid_validation():
    with pytest.raises(ValueError):
        GridId(1, 0, F(1, 4))
    with pytest.raises(ValueError):
        GridId(2, 2, F(1, 5))
    with pytest.raises(ValueError):
        GridId(2, 0, F(0))  # plain spelling is GridId(1,0,0)


def test_nesting_all_shifted_grids():
    for d in range(1, 5):
        for g in shifted_family(d):
            assert verify_grid_nesting(g, 4)
    assert verify_grid_nesting(PLAIN, 8)


def test_nesting_rejects_bad_shift():
    bad = GridId.unchecked(1, 0, F(1, 4))
    assert not verify_grid_nesting(bad, 2)


def test_same_scale_tiling_no_overlap():
    for g in (PLAIN, D_PLUS, GridId(3, 1, F(1, 9))):
        for k in (-2, 0, 1):
            spans = [grid_interval_endpoints(g, k, j) for j in range(-4, 5)]
            spans.sort()
            for (a, b), (c, d) in zip(spans, spans[1:]):
                assert b == c  # adjacent, no gap, no overlap


def test_shifted_membership_exhaustive_small():
    # I +- delta|I| lands in the d-shifted family, for all plain dyadic I
    for d in range(1, 5):
        for depth in range(0, 7):
            for idx in [0, 1, (1 << depth) - 1, 5 % (1 << depth)]:
                assert shifted_membership(plain_interval(depth, idx), d)


def test_shadow_single_rectangle():
    r = rect(plain_interval(1, 0), plain_interval(1, 0))
    coll = RectCollection([r])
    assert shadow(coll).measure == F(1, 4)


def test_shadow_overlap_inclusion_exclusion():
    r1 = rect(plain_interval(1, 0), plain_interval(1, 0))  # [0,1/2)^2
    r2 = rect(plain_interval(2, 0), plain_interval(0, 0))  # [0,1/4)x[0,1)
    assert shadow(RectCollection([r1, r2])).measure == F(3, 8)


def _random_rect(rng, n, depth):
    sides = []
    for _ in range(n):
        d = rng.randrange(0, depth + 1)
        j = rng.randrange(0, 1 << d)
        sides.append(plain_interval(d, j))
    return rect(*sides)


def _sweep_measure(boxes):
    """Brute-force union measure by splitting on the full breakpoint lattice."""
    n = len(boxes[0].sides)
    cuts = [sorted({e for b in boxes for e in b.sides[i]}) for i in range(n)]

    def rec(i, cell):
        if i == n:
            vol = F(1)
            for lo, hi in cell:
                vol *= hi - lo
            covered = any(
                all(s[0] <= c[0] and c[1] <= s[1] for s, c in zip(b.sides, cell))
                for b in boxes
            )
            return vol if covered else F(0)
        total = F(0)
        for a, b in zip(cuts[i], cuts[i][1:]):
            total += rec(i + 1, cell + [(a, b)])
        return total

    return rec(0, [])


def test_shadow_measure_matches_exact_sweep():
    rng = random.Random(123)
    for trial in range(12):
        n = rng.choice([1, 2, 3])
        rects = [_random_rect(rng, n, 5) for _ in range(rng.randrange(2, 9))]
        coll = RectCollection(rects)
        boxes = [r.box() for r in rects]
        assert shadow(coll).measure == _sweep_measure(boxes)


def test_shadow_monotone():
    rng = random.Random(5)
    rects = [_random_rect(rng, 2, 4) for _ in range(8)]
    small = RectCollection(rects[:4])
    big = RectCollection(rects)
    assert big.shadow.contains_set(small.shadow)


def test_openset_canonical_equality():
    # same set, different presentations
    a = OpenSet([box_from_pairs((0, 2), (0, 1))])
    b = OpenSet([box_from_pairs((0, 1), (0, 1)), box_from_pairs((1, 2), (0, 1))])
    c = OpenSet(
        [box_from_pairs((0, 2), (0, F(1, 2))), box_from_pairs((0, 2), (F(1, 2), 1))]
    )
    assert a == b == c
    assert a.boxes == (box_from_pairs((0, 2), (0, 1)),)


def test_openset_additivity_on_disjoint_boxes():
    a = box_from_pairs((0, 1), (0, 1))
    b = box_from_pairs((2, 3), (0, 1))
    u = OpenSet([a, b])
    assert u.measure == F(2)
    assert u.contains_box(a) and u.contains_box(b)
    assert not u.contains_box(box_from_pairs((0, 3), (0, 1)))


def test_dilate_identity():
    b = box_from_pairs((F(1, 2), 1), (0, F(1, 2)))
    assert dilate_rect(b, 1, [1]) == b


def test_dilate_concentric():
    b = box_from_pairs((F(1, 2), 1), (F(1, 2), 1))
    assert dilate_rect(b, 3, [1]) == box_from_pairs((0, F(3, 2)), (F(1, 2), 1))


def test_dilate_both_coords():
    b = box_from_pairs((0, F(1, 4)), (0, F(1, 2)))
    assert dilate_rect(b, 2, [1, 2]) == box_from_pairs(
        (F(-1, 8), F(3, 8)), (F(-1, 4), F(3, 4))
    )


def test_dilate_rejects_small_mu():
    b = box_from_pairs((0, 1))
    with pytest.raises(ValueError):
        dilate_rect(b, F(1, 2), [1])


def _assert_cover(lo, hi):
    j = cover_in_S(lo, hi)
    length = hi - lo
    c = (lo + hi) / 2
    assert j.lo <= lo and hi <= j.hi
    assert c - 2 * length <= j.lo and j.hi <= c + 2 * length
    assert interval_in_family(j.lo, j.hi, S_GRIDS) is not None
    return j


def test_cover_member_returned_as_is():
    j = _assert_cover(F(0), F(1, 2))
    assert (j.lo, j.hi) == (F(0), F(1, 2))


def test_cover_examples():
    j = _assert_cover(F(3, 8), F(5, 8))
    assert F(-1, 8) <= j.lo and j.hi <= F(9, 8)
    j = _assert_cover(F(1, 3), F(2, 3))
    assert j.length <= F(4, 3)


@given(
    num=st.integers(min_value=-200, max_value=200),
    den=st.sampled_from([3, 5, 7, 8, 12, 16, 48]),
    len_num=st.integers(min_value=1, max_value=100),
    len_den=st.sampled_from([1, 2, 3, 5, 8, 24]),
)
@settings(max_examples=200, deadline=None)
def test_cover_always_valid(num, den, len_num, len_den):
    lo = F(num, den)
    hi = lo + F(len_num, len_den)
    _assert_cover(lo, hi)


def test_serialization_round_trip():
    rng = random.Random(99)
    rects = [_random_rect(rng, 3, 6) for _ in range(10)]
    # mix in shifted-grid sides
    rects.append(
        rect(
            GridInterval(D_PLUS, -2, 3),
            GridInterval(D_MINUS, 0, -1),
            GridInterval(GridId(3, 2, F(1, 9)), -1, 4),
        )
    )
    coll = RectCollection(rects)
    again = RectCollection.from_text(coll.to_text())
    assert again == coll


def test_side_text_format():
    s = GridInterval(D_PLUS, -2, 3)
    assert side_to_text(s) == "grid:1,0,1/3;-2;3"
    assert side_from_text("grid:1,0,1/3;-2;3") == s
