"""Exact superlevel sets of dyadic-type maximal functions on indicator sets.

A grid interval I qualifies for threshold lam when ``|I ∩ U| > lam * |I|``
(strict, matching the displayed level sets).  Candidate intervals are
enumerated over a finite scale range: lengths below `min_len` are skipped and
lengths at or above ``|U| / lam`` cannot qualify.  When the input set is
aligned with the grid at some resolution, the default floor is that
resolution and the result equals the full (all-scales) superlevel set;
otherwise the floor truncates boundary slivers of width below `min_len`,
which is the documented discretization.

With ``absorb=True`` the input set is unioned into the result, the discrete
counterpart of the fact that the maximal function equals one on the set
itself; the covering-lemma cascade relies on it.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .dyadic import (
    Box,
    GridId,
    GridInterval,
    OpenSet,
    PLAIN,
    Side,
    _is_power_of_two,
    _log2_exact,
    grid_interval_endpoints,
    shifted_family,
)


@dataclass(frozen=True)
class MaximalQuery:
    """A superlevel-set query; `grid` may be a GridId, a tuple of them, or
    the string \"strong-dyadic\"."""

    set: OpenSet
    lam: Fraction
    grid: object = PLAIN
    coord: Optional[int] = None

    def __post_init__(self):
        if not (0 < self.lam < 1):
            raise ValueError("lambda must lie in (0,1)")


# ---------------------------------------------------------------------------
# 1-D core
# ---------------------------------------------------------------------------


def _fiber_measure(ivals: Sequence[Side]) -> Fraction:
    return sum((b - a for a, b in ivals), Fraction(0))


def _overlap(ivals: Sequence[Side], lo: Fraction, hi: Fraction) -> Fraction:
    total = Fraction(0)
    for a, b in ivals:
        x, y = max(a, lo), min(b, hi)
        if x < y:
            total += y - x
    return total


def _fiber_resolution(ivals: Sequence[Side], grid: GridId) -> Optional[int]:
    """Largest scale exponent s with all endpoints on the grid's scale-s lattice,
    or None if the grid's shifts never align."""
    lengths = [b - a for a, b in ivals]
    smallest = min(lengths)
    if not _is_power_of_two(smallest):
        # round down to a power of two
        s = -(int(1 / smallest).bit_length())
    else:
        s = _log2_exact(smallest)
    for _ in range(64):
        if (s - grid.b) % grid.d == 0:
            k = (s - grid.b) // grid.d
            ell = grid.scale_length(k)
            shift = grid.shift_at_scale(k)
            ok = True
            for a, b in ivals:
                ta = a / ell - shift
                tb = b / ell - shift
                if ta.denominator != 1 or tb.denominator != 1:
                    ok = False
                    break
            if ok:
                return s
        s -= 1
        if s < -80:
            return None
    return None


def default_scale_floor(ivals: Sequence[Side], grids: Sequence[GridId]) -> Fraction:
    """Canonical enumeration floor: the alignment resolution when every grid
    aligns with the set, else 1/16 of the smallest component length."""
    floors = []
    for g in grids:
        s = _fiber_resolution(ivals, g)
        if s is None:
            floors.append(None)
        else:
            floors.append(Fraction(2) ** s)
    if all(f is not None for f in floors):
        return min(floors)
    smallest = min(b - a for a, b in ivals)
    return smallest / 16


def superlevel_1d(
    ivals: Sequence[Side],
    grids: Sequence[GridId],
    lam: Fraction,
    min_len: Optional[Fraction] = None,
    absorb: bool = False,
) -> list[Side]:
    """Union of qualifying grid intervals over a finite scale range (1-D)."""
    if not ivals:
        return []
    lam = Fraction(lam)
    measure = _fiber_measure(ivals)
    if min_len is None:
        min_len = default_scale_floor(ivals, grids)
    span_lo = min(a for a, _ in ivals)
    span_hi = max(b for _, b in ivals)
    out: list[Side] = list(ivals) if absorb else []
    cap = measure / lam
    for grid in grids:
        # scale indices k with min_len <= 2^(k*d + b) < cap
        s = grid.b
        while Fraction(2) ** s >= min_len:
            s -= grid.d
        while Fraction(2) ** s < min_len:
            s += grid.d
        while Fraction(2) ** s < cap:
            k = (s - grid.b) // grid.d
            ell = grid.scale_length(k)
            shift = grid.shift_at_scale(k)
            j0 = ((span_lo - ell) / ell - shift).__floor__()
            j1 = ((span_hi) / ell - shift).__ceil__()
            thresh = lam * ell
            for j in range(j0, j1 + 1):
                lo = ell * (j + shift)
                hi = lo + ell
                if hi <= span_lo or lo >= span_hi:
                    continue
                if _overlap(ivals, lo, hi) > thresh:
                    out.append((lo, hi))
            s += grid.d
    # merge
    if not out:
        return []
    out.sort()
    merged = [out[0]]
    for a, b in out[1:]:
        la, lb = merged[-1]
        if a <= lb:
            if b > lb:
                merged[-1] = (la, b)
        else:
            merged.append((a, b))
    return merged


def _as_grids(grid) -> tuple[GridId, ...]:
    if isinstance(grid, GridId):
        return (grid,)
    return tuple(grid)


# ---------------------------------------------------------------------------
# n-D operations
# ---------------------------------------------------------------------------


def superlevel_grid(
    set_: OpenSet,
    grid,
    lam: Fraction,
    min_len: Optional[Fraction] = None,
    absorb: bool = False,
) -> OpenSet:
    """1-D superlevel set of the grid maximal function of the indicator."""
    if set_.n != 1:
        raise ValueError("superlevel_grid is one-dimensional; use superlevel_directional")
    if not (0 < Fraction(lam) < 1):
        raise ValueError("lambda must lie in (0,1)")
    if set_.is_empty():
        return OpenSet.empty(1)
    ivals = [b.sides[0] for b in set_.boxes]
    out = superlevel_1d(ivals, _as_grids(grid), Fraction(lam), min_len, absorb)
    return OpenSet([Box((iv,)) for iv in out], 1)


def superlevel_directional(
    set_: OpenSet,
    coord: int,
    grid,
    lam: Fraction,
    min_len: Optional[Fraction] = None,
    absorb: bool = False,
) -> OpenSet:
    """Apply the 1-D superlevel fiberwise in the given (1-based) coordinate."""
    n = set_.n
    if not (1 <= coord <= n):
        raise ValueError("coordinate out of range")
    if not (0 < Fraction(lam) < 1):
        raise ValueError("lambda must lie in (0,1)")
    if set_.is_empty():
        return OpenSet.empty(n)
    if n == 1:
        return superlevel_grid(set_, grid, lam, min_len, absorb)
    order = [i for i in range(n) if i != coord - 1] + [coord - 1]
    inverse = [0] * n
    for new_axis, src in enumerate(order):
        inverse[src] = new_axis
    moved = set_.permuted(order)
    grids = _as_grids(grid)
    lam = Fraction(lam)
    boxes: list[Box] = []
    for prefix, fiber in moved.grouped_fibers():
        out = superlevel_1d(fiber, grids, lam, min_len, absorb)
        for iv in out:
            boxes.append(Box(prefix + (iv,)))
    if not boxes:
        return OpenSet.empty(n)
    return OpenSet(boxes, n).permuted(inverse)


def superlevel_strong(
    set_: OpenSet,
    lam: Fraction,
    min_len: Optional[Fraction] = None,
    absorb: bool = False,
) -> OpenSet:
    """Superlevel set of the dyadic strong maximal function.

    Union of all plain dyadic rectangles R with ``|R ∩ U| > lam |R|``, scales
    capped below by `min_len` per coordinate and above by the measure bound.
    """
    lam = Fraction(lam)
    if not (0 < lam < 1):
        raise ValueError("lambda must lie in (0,1)")
    if set_.is_empty():
        return OpenSet.empty(set_.n)
    n = set_.n
    measure = set_.measure
    cap = measure / lam
    spans = []
    for i in range(n):
        lo = min(b.sides[i][0] for b in set_.boxes)
        hi = max(b.sides[i][1] for b in set_.boxes)
        spans.append((lo, hi))
    if min_len is None:
        floors = []
        for i in range(n):
            ivs = sorted({b.sides[i] for b in set_.boxes})
            floors.append(default_scale_floor(ivs, (PLAIN,)))
        min_len_per_coord = floors
    else:
        min_len_per_coord = [Fraction(min_len)] * n

    # normalize floors to powers of two
    for i in range(n):
        e = min_len_per_coord[i]
        if not _is_power_of_two(e):
            s = 0
            while Fraction(2) ** s > e:
                s -= 1
            min_len_per_coord[i] = Fraction(2) ** s

    # per-coordinate candidate intervals, grouped by length; a side may be
    # long as long as the product volume can stay under the measure cap
    per_coord: list[list[tuple[Fraction, Fraction, Fraction]]] = []
    for i in range(n):
        lo_span, hi_span = spans[i]
        min_rest_other = Fraction(1)
        for m in range(n):
            if m != i:
                min_rest_other *= min_len_per_coord[m]
        cands = []
        ell = min_len_per_coord[i]
        while ell * min_rest_other < cap:
            j0 = ((lo_span - ell) / ell).__floor__()
            j1 = (hi_span / ell).__ceil__()
            for j in range(j0, j1 + 1):
                lo = ell * j
                hi = lo + ell
                if hi <= lo_span or lo >= hi_span:
                    continue
                cands.append((ell, lo, hi))
            ell *= 2
        per_coord.append(cands)

    out: list[Box] = list(set_.boxes) if absorb else []

    min_rest_after = [Fraction(1)] * (n + 1)
    for i in range(n - 1, -1, -1):
        min_rest_after[i] = min_rest_after[i + 1] * min_len_per_coord[i]

    def rec(i: int, sides: list[Side], vol: Fraction):
        if i == n:
            box = Box(tuple(sides))
            if set_.intersection_measure(box) > lam * vol:
                out.append(box)
            return
        for ell, lo, hi in per_coord[i]:
            # every completion of this prefix has volume >= vol*ell*min_rest
            if vol * ell * min_rest_after[i + 1] >= cap:
                continue
            sides.append((lo, hi))
            rec(i + 1, sides, vol * ell)
            sides.pop()

    rec(0, [], Fraction(1))
    if not out:
        return OpenSet.empty(n)
    return OpenSet(out, n)
