"""Exact-rational dyadic geometry: shifted grids, intervals, rectangles, box unions.

Everything here is pure and exact.  Endpoints are `fractions.Fraction`, all
containment and measure queries are decided by rational arithmetic, and the
normal form of a box union is canonical, so two equal sets compare equal.

Grids follow the shifted-dyadic convention: the grid with parameters
(d, b, alpha) consists of the intervals ``2**(k*d+b) * ((0,1) + j + (-1)**k * alpha)``
over integers k, j, with ``alpha in {0, +1/(2**d+1), -1/(2**d+1)}``.  The
alternating sign is what makes each shifted family a grid (children tile
their parent exactly); see :func:`verify_grid_nesting`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

Rat = Fraction

#: Working window: all test geometry lives inside [-2, 3)^n.
WINDOW_LO = Fraction(-2)
WINDOW_HI = Fraction(3)

#: Default depth cap for enumerations (side lengths down to 2**-DEFAULT_DEPTH).
DEFAULT_DEPTH = 8


def _is_power_of_two(q: Fraction) -> bool:
    if q <= 0:
        return False
    num, den = q.numerator, q.denominator
    if num == 1:
        return den & (den - 1) == 0
    if den == 1:
        return num & (num - 1) == 0
    return False


def _log2_exact(q: Fraction) -> int:
    """log2 of an exact power of two."""
    if not _is_power_of_two(q):
        raise ValueError(f"{q} is not a power of two")
    if q.numerator == 1:
        return -(q.denominator.bit_length() - 1)
    return q.numerator.bit_length() - 1


# ---------------------------------------------------------------------------
# grids and grid intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class GridId:
    """A (possibly shifted) dyadic grid.

    ``alpha == 0`` (with d=1, b=0) is the plain dyadic grid.  Otherwise
    ``alpha`` must be exactly ``+-1/(2**d+1)``.
    """

    d: int = 1
    b: int = 0
    alpha: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if self.d < 1:
            raise ValueError("grid period exponent d must be >= 1")
        if not (0 <= self.b < self.d):
            raise ValueError("grid offset b must lie in [0, d)")
        if self.alpha == 0:
            if (self.d, self.b) != (1, 0):
                raise ValueError("the plain grid is GridId(1, 0, 0)")
        else:
            delta = Fraction(1, 2**self.d + 1)
            if self.alpha not in (delta, -delta):
                raise ValueError("alpha must be 0 or +-1/(2^d+1) exactly")

    @classmethod
    def unchecked(cls, d: int, b: int, alpha: Fraction) -> "GridId":
        """Bypass validation (used to build deliberately broken grids in tests)."""
        self = object.__new__(cls)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", Fraction(alpha))
        return self

    @property
    def is_plain(self) -> bool:
        return self.alpha == 0

    def scale_length(self, k: int) -> Fraction:
        return Fraction(2) ** (k * self.d + self.b)

    def shift_at_scale(self, k: int) -> Fraction:
        """Lattice offset at scale index k, in units of the scale length."""
        return self.alpha if k % 2 == 0 else -self.alpha


PLAIN = GridId()
D_PLUS = GridId(1, 0, Fraction(1, 3))
D_MINUS = GridId(1, 0, Fraction(-1, 3))

#: The union grid family used for interval covers (plain plus both 1/3-shifts).
S_GRIDS = (PLAIN, D_PLUS, D_MINUS)


def shifted_family(d: int) -> tuple[GridId, ...]:
    """All 2d shifted grids with parameter d (both signs, every offset b)."""
    delta = Fraction(1, 2**d + 1)
    return tuple(
        GridId(d, b, sign * delta) for b in range(d) for sign in (1, -1)
    )


def grid_interval_endpoints(grid: GridId, k: int, j: int) -> tuple[Fraction, Fraction]:
    """Exact endpoints of the grid interval with scale index k, translation j."""
    length = grid.scale_length(k)
    lo = length * (j + grid.shift_at_scale(k))
    return lo, lo + length


@dataclass(frozen=True, order=True)
class GridInterval:
    grid: GridId
    k: int
    j: int

    @property
    def lo(self) -> Fraction:
        return grid_interval_endpoints(self.grid, self.k, self.j)[0]

    @property
    def hi(self) -> Fraction:
        return grid_interval_endpoints(self.grid, self.k, self.j)[1]

    @property
    def length(self) -> Fraction:
        return self.grid.scale_length(self.k)

    @property
    def center(self) -> Fraction:
        lo, hi = grid_interval_endpoints(self.grid, self.k, self.j)
        return (lo + hi) / 2

    def interval(self) -> tuple[Fraction, Fraction]:
        return grid_interval_endpoints(self.grid, self.k, self.j)

    def contains(self, other: "GridInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __repr__(self):
        return f"GridInterval({self.lo}, {self.hi}; grid={self.grid.d},{self.grid.b},{self.grid.alpha})"


def plain_interval(depth: int, index: int) -> GridInterval:
    """Plain dyadic interval of length 2**-depth starting at index*2**-depth."""
    return GridInterval(PLAIN, -depth, index)


def grid_interval_containing(grid: GridId, k: int, x: Fraction) -> GridInterval:
    """The unique scale-k interval of `grid` containing the point x."""
    length = grid.scale_length(k)
    shift = grid.shift_at_scale(k)
    j = (x / length - shift).__floor__()
    return GridInterval(grid, k, j)


def interval_in_grid(lo: Fraction, hi: Fraction, grid: GridId) -> Optional[GridInterval]:
    """Return the GridInterval equal to [lo, hi) if it belongs to `grid`."""
    length = hi - lo
    if not _is_power_of_two(length):
        return None
    s = _log2_exact(length)
    if (s - grid.b) % grid.d != 0:
        return None
    k = (s - grid.b) // grid.d
    t = lo / length - grid.shift_at_scale(k)
    if t.denominator != 1:
        return None
    return GridInterval(grid, k, int(t))


def interval_in_family(lo: Fraction, hi: Fraction, grids: Sequence[GridId]) -> Optional[GridInterval]:
    for g in grids:
        gi = interval_in_grid(lo, hi, g)
        if gi is not None:
            return gi
    return None


def verify_grid_nesting(grid: GridId, depth: int) -> bool:
    """Check that scale-k intervals are exact disjoint unions of their children.

    Checked for scale indices k in [-depth, 1] and a few translations; the
    lattice at fixed scale is translation-periodic, so this is exhaustive
    for the grid structure itself.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    for k in range(1, -depth - 1, -1):
        for j in (-1, 0, 1):
            plo, phi = grid_interval_endpoints(grid, k, j)
            clen = grid.scale_length(k - 1)
            shift = grid.shift_at_scale(k - 1)
            # candidate child translations around the parent
            j_start = (plo / clen - shift).__floor__() - 1
            children = []
            jj = j_start
            while True:
                clo, chi = grid_interval_endpoints(grid, k - 1, jj)
                if clo >= phi:
                    break
                if clo >= plo and chi <= phi:
                    children.append((clo, chi))
                jj += 1
                if jj - j_start > 2 ** grid.d + 4:
                    break
            if len(children) != 2**grid.d:
                return False
            children.sort()
            if children[0][0] != plo or children[-1][1] != phi:
                return False
            for (a, b), (c, e) in zip(children, children[1:]):
                if b != c:
                    return False
    return True


def shifted_membership(interval: GridInterval, d: int) -> bool:
    """Is interval +- |I|/(2^d+1) a member of the d-shifted family?

    Checks both translates; returns True only if both land in the family.
    """
    delta = Fraction(1, 2**d + 1)
    lo, hi = interval.interval()
    length = hi - lo
    fam = shifted_family(d)
    for sign in (1, -1):
        t = sign * delta * length
        if interval_in_family(lo + t, hi + t, fam) is None:
            return False
    return True


# ---------------------------------------------------------------------------
# boxes and canonical open sets
# ---------------------------------------------------------------------------

Side = tuple[Fraction, Fraction]


@dataclass(frozen=True)
class Box:
    """Axis-aligned half-open box: product of [lo, hi) sides."""

    sides: tuple[Side, ...]

    def __post_init__(self):
        for lo, hi in self.sides:
            if lo >= hi:
                raise ValueError(f"degenerate box side [{lo}, {hi})")

    @property
    def n(self) -> int:
        return len(self.sides)

    @property
    def volume(self) -> Fraction:
        v = Fraction(1)
        for lo, hi in self.sides:
            v *= hi - lo
        return v

    def contains_box(self, other: "Box") -> bool:
        return all(
            a <= c and d <= b for (a, b), (c, d) in zip(self.sides, other.sides)
        )

    def intersection_volume(self, other: "Box") -> Fraction:
        v = Fraction(1)
        for (a, b), (c, d) in zip(self.sides, other.sides):
            lo, hi = max(a, c), min(b, d)
            if lo >= hi:
                return Fraction(0)
            v *= hi - lo
        return v

    def dilate(self, mu: Fraction, coords: Iterable[int]) -> "Box":
        """Scale the listed 1-based coordinates by mu about each side's center."""
        mu = Fraction(mu)
        cs = set(coords)
        sides = []
        for i, (lo, hi) in enumerate(self.sides, start=1):
            if i in cs:
                c = (lo + hi) / 2
                h = (hi - lo) / 2 * mu
                sides.append((c - h, c + h))
            else:
                sides.append((lo, hi))
        return Box(tuple(sides))


def box_from_pairs(*pairs: Sequence) -> Box:
    return Box(tuple((Fraction(a), Fraction(b)) for a, b in pairs))


def _merge_intervals(ivals: list[Side]) -> list[Side]:
    if not ivals:
        return []
    ivals = sorted(ivals)
    out = [ivals[0]]
    for a, b in ivals[1:]:
        la, lb = out[-1]
        if a <= lb:
            if b > lb:
                out[-1] = (la, b)
        else:
            out.append((a, b))
    return out


def _normalize(raw: list[tuple[Side, ...]], n: int) -> list[tuple[Side, ...]]:
    """Canonical disjoint decomposition of a union of half-open boxes.

    Slices on the first coordinate at breakpoints where the (n-1)-dimensional
    cross-section changes, recursing on cross-sections; adjacent slabs with
    identical canonical cross-sections are merged, and the innermost
    coordinate is a plain merged interval union.  The output depends only on
    the point set.
    """
    if not raw:
        return []
    if n == 1:
        return [(iv,) for iv in _merge_intervals([b[0] for b in raw])]
    cuts = sorted({e for b in raw for e in b[0]})
    slabs: list[tuple[Side, list[tuple[Side, ...]]]] = []
    for x0, x1 in zip(cuts, cuts[1:]):
        tails = [b[1:] for b in raw if b[0][0] <= x0 and x1 <= b[0][1]]
        if not tails:
            continue
        sub = _normalize(tails, n - 1)
        if slabs and slabs[-1][0][1] == x0 and slabs[-1][1] == sub:
            slabs[-1] = ((slabs[-1][0][0], x1), sub)
        else:
            slabs.append(((x0, x1), sub))
    out = []
    for slab, sub in slabs:
        for tail in sub:
            out.append((slab,) + tail)
    return out


class OpenSet:
    """Finite union of rational half-open boxes in canonical form.

    The canonical boxes are pairwise disjoint, so measures are plain sums
    and `contains_box` reduces to an exact volume comparison.
    """

    __slots__ = ("n", "boxes", "_measure")

    def __init__(self, boxes: Sequence[Box], n: Optional[int] = None):
        boxes = list(boxes)
        if n is None:
            if not boxes:
                raise ValueError("dimension required for an empty set")
            n = boxes[0].n
        for b in boxes:
            if b.n != n:
                raise ValueError("mixed dimensions in box union")
        norm = _normalize([b.sides for b in boxes], n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "boxes", tuple(Box(s) for s in norm))
        object.__setattr__(self, "_measure", sum((b.volume for b in self.boxes), Fraction(0)))

    def __setattr__(self, *a):  # immutable
        raise AttributeError("OpenSet is immutable")

    @classmethod
    def empty(cls, n: int) -> "OpenSet":
        return cls([], n)

    @property
    def measure(self) -> Fraction:
        return self._measure

    def is_empty(self) -> bool:
        return not self.boxes

    def __eq__(self, other):
        return (
            isinstance(other, OpenSet)
            and self.n == other.n
            and self.boxes == other.boxes
        )

    def __hash__(self):
        return hash((self.n, self.boxes))

    def __repr__(self):
        return f"OpenSet(n={self.n}, boxes={len(self.boxes)}, measure={self.measure})"

    def union(self, other: "OpenSet") -> "OpenSet":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return OpenSet(self.boxes + other.boxes, self.n)

    def union_box(self, box: Box) -> "OpenSet":
        return OpenSet(self.boxes + (box,), self.n)

    def intersection_measure(self, box: Box) -> Fraction:
        # canonical boxes are disjoint, so a plain sum is exact
        return sum((b.intersection_volume(box) for b in self.boxes), Fraction(0))

    def intersect_box(self, box: Box) -> "OpenSet":
        pieces = []
        for b in self.boxes:
            sides = []
            ok = True
            for (a, c), (p, q) in zip(b.sides, box.sides):
                lo, hi = max(a, p), min(c, q)
                if lo >= hi:
                    ok = False
                    break
                sides.append((lo, hi))
            if ok:
                pieces.append(Box(tuple(sides)))
        return OpenSet(pieces, self.n)

    def contains_box(self, box: Box) -> bool:
        """Exact set containment (equivalent to zero-measure difference here)."""
        return self.intersection_measure(box) == box.volume

    def contains_set(self, other: "OpenSet") -> bool:
        return all(self.contains_box(b) for b in other.boxes)

    def bounding_box(self) -> Optional[Box]:
        if not self.boxes:
            return None
        sides = []
        for i in range(self.n):
            lo = min(b.sides[i][0] for b in self.boxes)
            hi = max(b.sides[i][1] for b in self.boxes)
            sides.append((lo, hi))
        return Box(tuple(sides))

    def permuted(self, order: Sequence[int]) -> "OpenSet":
        """Reorder coordinates; `order[i]` is the source axis of new axis i."""
        boxes = [Box(tuple(b.sides[o] for o in order)) for b in self.boxes]
        return OpenSet(boxes, self.n)

    def grouped_fibers(self) -> list[tuple[tuple[Side, ...], list[Side]]]:
        """Group canonical boxes by their leading n-1 sides.

        Returns (prefix-cell, last-coordinate interval union) pairs; the
        prefix cells of distinct groups are disjoint.
        """
        groups: dict[tuple[Side, ...], list[Side]] = {}
        for b in self.boxes:
            groups.setdefault(b.sides[:-1], []).append(b.sides[-1])
        return [(pfx, _merge_intervals(ivs)) for pfx, ivs in groups.items()]

    # -- serialization (JSON-friendly rationals "p/q") ---------------------

    def to_json_obj(self) -> list:
        return [
            [[str(lo), str(hi)] for lo, hi in b.sides] for b in self.boxes
        ]

    @classmethod
    def from_json_obj(cls, obj: list, n: Optional[int] = None) -> "OpenSet":
        boxes = [
            Box(tuple((Fraction(lo), Fraction(hi)) for lo, hi in sides))
            for sides in obj
        ]
        if not boxes and n is None:
            raise ValueError("dimension required for an empty set")
        return cls(boxes, n if n is not None else boxes[0].n)


# ---------------------------------------------------------------------------
# dyadic rectangles and collections
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class DyadicRectangle:
    sides: tuple[GridInterval, ...]

    @property
    def n(self) -> int:
        return len(self.sides)

    @property
    def volume(self) -> Fraction:
        v = Fraction(1)
        for s in self.sides:
            v *= s.length
        return v

    def box(self) -> Box:
        return Box(tuple(s.interval() for s in self.sides))

    def side_lengths(self) -> tuple[Fraction, ...]:
        return tuple(s.length for s in self.sides)

    def replace_side(self, coord: int, side: GridInterval) -> "DyadicRectangle":
        """coord is 1-based."""
        sides = list(self.sides)
        sides[coord - 1] = side
        return DyadicRectangle(tuple(sides))

    def __repr__(self):
        parts = "x".join(f"[{s.lo},{s.hi})" for s in self.sides)
        return f"Rect({parts})"


def rect(*sides: GridInterval) -> DyadicRectangle:
    return DyadicRectangle(tuple(sides))


_SIDE_RE = re.compile(
    r"grid:(-?\d+),(-?\d+),(-?\d+)/(-?\d+);(-?\d+);(-?\d+)$"
)


def side_to_text(side: GridInterval) -> str:
    g = side.grid
    return f"grid:{g.d},{g.b},{g.alpha.numerator}/{g.alpha.denominator};{side.k};{side.j}"


def side_from_text(text: str) -> GridInterval:
    m = _SIDE_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad side syntax: {text!r}")
    d, b, an, ad, k, j = (int(m.group(i)) for i in range(1, 7))
    return GridInterval(GridId(d, b, Fraction(an, ad)), k, j)


class RectCollection:
    """A finite set of dyadic rectangles with its cached shadow."""

    __slots__ = ("rects", "n", "_shadow")

    def __init__(self, rects: Iterable[DyadicRectangle]):
        rs = frozenset(rects)
        if not rs:
            raise ValueError("empty rectangle collection")
        ns = {r.n for r in rs}
        if len(ns) != 1:
            raise ValueError("mixed dimensions in collection")
        object.__setattr__(self, "rects", rs)
        object.__setattr__(self, "n", ns.pop())
        object.__setattr__(self, "_shadow", None)

    def __setattr__(self, *a):
        raise AttributeError("RectCollection is immutable")

    def __iter__(self) -> Iterator[DyadicRectangle]:
        return iter(sorted(self.rects))

    def __len__(self):
        return len(self.rects)

    def __contains__(self, r):
        return r in self.rects

    def __eq__(self, other):
        return isinstance(other, RectCollection) and self.rects == other.rects

    def __hash__(self):
        return hash(self.rects)

    @property
    def shadow(self) -> OpenSet:
        cached = self._shadow
        if cached is None:
            cached = OpenSet([r.box() for r in sorted(self.rects)], self.n)
            object.__setattr__(self, "_shadow", cached)
        return cached

    def subset(self, rects: Iterable[DyadicRectangle]) -> "RectCollection":
        rs = frozenset(rects)
        if not rs <= self.rects:
            raise ValueError("not a subset of this collection")
        return RectCollection(rs)

    def to_text(self) -> str:
        lines = []
        for r in sorted(self.rects):
            lines.append("x".join(side_to_text(s) for s in r.sides))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RectCollection":
        rects = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            sides = tuple(side_from_text(p) for p in line.split("x"))
            rects.append(DyadicRectangle(sides))
        return cls(rects)


def shadow(coll: RectCollection) -> OpenSet:
    return coll.shadow


def dilate_rect(r: DyadicRectangle | Box, mu: Fraction, coords: Iterable[int]) -> Box:
    """Concentric dilation of the listed (1-based) coordinates by mu >= 1."""
    mu = Fraction(mu)
    if mu < 1:
        raise ValueError("dilation factor must be >= 1")
    box = r.box() if isinstance(r, DyadicRectangle) else r
    return box.dilate(mu, coords)


# ---------------------------------------------------------------------------
# covers in the three-grid family S
# ---------------------------------------------------------------------------


def _dyadic_candidates(lo: Fraction, hi: Fraction) -> Iterator[GridInterval]:
    """Plain dyadic intervals J inside the concentric 4-fold dilation of [lo,hi)
    with |J meet [lo,hi)| >= |I|/2, largest scales first."""
    length = hi - lo
    c = (lo + hi) / 2
    big_lo, big_hi = c - 2 * length, c + 2 * length
    s_hi = math.floor(math.log2(float(4 * length))) + 1
    s_lo = math.floor(math.log2(float(length))) - 2
    for s in range(s_hi, s_lo - 1, -1):
        ell = Fraction(2) ** s
        if ell > 4 * length:
            continue
        j0 = (big_lo / ell).__floor__()
        j1 = (big_hi / ell).__ceil__()
        for j in range(j0, j1 + 1):
            jlo = ell * j
            jhi = jlo + ell
            if jlo < big_lo or jhi > big_hi:
                continue
            overlap = min(hi, jhi) - max(lo, jlo)
            if overlap * 2 >= length:
                yield GridInterval(PLAIN, s, j)


def cover_in_S(lo: Fraction, hi: Fraction) -> GridInterval:
    """An interval J from the plain/±1/3-shifted family with I ⊆ J ⊆ 4I.

    Selection follows the maximal-dyadic-then-shift rule: take the maximal
    plain dyadic J' ⊆ 4I meeting I in at least half of I; if it does not
    contain I, one of its two 1/3-shifts does.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    if lo >= hi:
        raise ValueError("empty interval")
    member = interval_in_family(lo, hi, S_GRIDS)
    if member is not None:
        return member
    length = hi - lo
    c = (lo + hi) / 2
    big_lo, big_hi = c - 2 * length, c + 2 * length

    # candidates arrive largest scale first, leftmost first within a scale
    best: Optional[GridInterval] = next(_dyadic_candidates(lo, hi), None)
    if best is None:  # pragma: no cover - cannot happen for bounded I
        raise RuntimeError("no dyadic candidate found")
    if best.lo <= lo and hi <= best.hi:
        return best
    jlen = best.length
    for gi in (
        interval_in_family(best.lo + jlen / 3, best.hi + jlen / 3, S_GRIDS),
        interval_in_family(best.lo - jlen / 3, best.hi - jlen / 3, S_GRIDS),
    ):
        if gi is None:
            continue
        if gi.lo <= lo and hi <= gi.hi and big_lo <= gi.lo and gi.hi <= big_hi:
            return gi
    # fallback: direct search over the family (not expected to trigger)
    for s in range(math.floor(math.log2(float(length))), math.floor(math.log2(float(4 * length))) + 2):
        for g in S_GRIDS:
            ell = Fraction(2) ** s
            shift = g.shift_at_scale(s)
            j0 = (big_lo / ell - shift).__floor__()
            j1 = (big_hi / ell - shift).__ceil__()
            for j in range(j0, j1 + 1):
                glo, ghi = grid_interval_endpoints(g, s, j)
                if glo <= lo and hi <= ghi and big_lo <= glo and ghi <= big_hi:
                    return GridInterval(g, s, j)
    raise RuntimeError(f"no cover found for [{lo}, {hi})")  # pragma: no cover
