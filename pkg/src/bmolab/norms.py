"""Carleson-ratio machinery: product BMO, rectangular BMO and one-frozen-
coordinate estimators over wavelet coefficient families.

Every non-exhaustive estimate is a certified lower bound: the returned value
is the exact Carleson ratio of the returned witness.  The exhaustive strategy
enumerates all unions of at most 16 support rectangles and therefore
dominates the others on the same input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .dyadic import (
    Box,
    DyadicRectangle,
    GridInterval,
    OpenSet,
    PLAIN,
    RectCollection,
    plain_interval,
)
from .wavelet import WaveletCoeffs

EXHAUSTIVE_LIMIT = 16

STRATEGIES = ("single-rect", "greedy-downset", "exhaustive", "frozen-coordinate")


class CarlesonViolation(ValueError):
    """A claimed Carleson packing bound failed; carries the violating set."""

    def __init__(self, msg: str, witness: OpenSet):
        super().__init__(msg)
        self.witness = witness


@dataclass
class BmoEstimate:
    value: float
    witness: RectCollection | OpenSet | None
    strategy: str

    def witness_set(self) -> Optional[OpenSet]:
        if self.witness is None:
            return None
        if isinstance(self.witness, RectCollection):
            return self.witness.shadow
        return self.witness


def carleson_ratio(c: WaveletCoeffs, U: OpenSet) -> float:
    """[ |U|^{-1} sum_{R ⊆ U} |c(R)|^2 ]^{1/2}, containment tested exactly."""
    if U.measure == 0:
        raise ValueError("zero-measure set in Carleson ratio")
    total = 0.0
    for r, v in c.data.items():
        if U.contains_box(r.box()):
            total += abs(v) ** 2
    return math.sqrt(total / float(U.measure))


# ---------------------------------------------------------------------------
# lattice bitmask engine for fast union/containment over support subsets
# ---------------------------------------------------------------------------


class _SupportLattice:
    """Support rectangles decomposed on their common breakpoint lattice.

    Boolean cell-membership rows make subset-union measures and
    rectangle-containment tests cheap vector operations.
    """

    def __init__(self, rects: Sequence[DyadicRectangle]):
        import numpy as np

        self.np = np
        self.rects = list(rects)
        n = rects[0].n
        cuts = []
        for i in range(n):
            cuts.append(sorted({e for r in rects for e in r.box().sides[i]}))
        cells = [()]
        for i in range(n):
            cells = [
                t + ((a, b),)
                for t in cells
                for a, b in zip(cuts[i], cuts[i][1:])
            ]
        boxes = [r.box() for r in rects]
        kept = [Box(cell) for cell in cells if any(b.contains_box(Box(cell)) for b in boxes)]
        self.cells = kept
        self.cell_vol = np.array([float(cb.volume) for cb in kept])
        rows = np.zeros((len(rects), len(kept)), dtype=bool)
        for ridx, b in enumerate(boxes):
            for idx, cb in enumerate(kept):
                rows[ridx, idx] = b.contains_box(cb)
        self.rows = rows

    def union_rows(self, indices) -> "object":
        return self.rows[list(indices)].any(axis=0)

    def union_measure(self, indices) -> float:
        return float(self.cell_vol[self.union_rows(indices)].sum())

    def captured_energy(self, indices, energies: Sequence[float]) -> float:
        """Energy of all support rectangles inside the subset's union."""
        u = self.union_rows(indices)
        total = 0.0
        for i in range(len(self.rects)):
            if not (self.rows[i] & ~u).any():
                total += energies[i]
        return total


def _single_rect_estimate(c: WaveletCoeffs) -> BmoEstimate:
    """Max ratio over single dyadic rectangles (rectangular BMO).

    Candidates: for each support rectangle, all products of plain-dyadic
    ancestors of its sides (within the unit window when sides live there).
    """
    best_val, best_rect = -1.0, None
    support = list(c.data)
    energies = {r: abs(v) ** 2 for r, v in c.data.items()}
    # per-coordinate hull of the support, so ancestor chains stop once a
    # candidate side covers every support side in that coordinate
    hull = []
    for i in range(support[0].n):
        hull.append(
            (
                min(r.sides[i].lo for r in support),
                max(r.sides[i].hi for r in support),
            )
        )
    seen = set()
    for r in support:
        chains = []
        for i, s in enumerate(r.sides):
            chain = [s]
            cur = s
            while cur.grid.is_plain and not (
                cur.lo <= hull[i][0] and hull[i][1] <= cur.hi
            ):
                cur = GridInterval(PLAIN, cur.k + 1, cur.j // 2)
                chain.append(cur)
                if cur.k > 4:
                    break
            chains.append(chain)

        def rec(i, sides):
            if i == len(chains):
                cand = DyadicRectangle(tuple(sides))
                if cand in seen:
                    return
                seen.add(cand)
                cb = cand.box()
                total = 0.0
                for rr in support:
                    if cb.contains_box(rr.box()):
                        total += energies[rr]
                nonlocal best_val, best_rect
                val = math.sqrt(total / float(cand.volume))
                if val > best_val:
                    best_val, best_rect = val, cand
                return
            for side in chains[i]:
                rec(i + 1, sides + [side])

        rec(0, [])
    witness = RectCollection([best_rect]) if best_rect is not None else None
    return BmoEstimate(best_val if best_val >= 0 else 0.0, witness, "single-rect")


def bmo_estimate(c: WaveletCoeffs, strategy: str = "greedy-downset") -> BmoEstimate:
    """Lower-bound estimate of the product BMO supremum.

    single-rect: best single dyadic rectangle.
    greedy-downset: grow a union of support rectangles by best marginal ratio;
      reported value also dominates the single-rect value.
    exhaustive: all unions of support rectangles (≤ 16 of them).
    """
    if strategy not in ("single-rect", "greedy-downset", "exhaustive"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if not c.data:
        return BmoEstimate(0.0, None, strategy)
    support = sorted(c.data)
    energies = [abs(c.data[r]) ** 2 for r in support]
    single = _single_rect_estimate(c)
    if strategy == "single-rect":
        return single

    lat = _SupportLattice(support)
    k = len(support)

    def ratio(mask: int) -> float:
        idx = [i for i in range(k) if mask >> i & 1]
        meas = lat.union_measure(idx)
        if meas == 0:
            return 0.0
        return math.sqrt(lat.captured_energy(idx, energies) / meas)

    if strategy == "exhaustive":
        if k > EXHAUSTIVE_LIMIT:
            raise ValueError(
                f"exhaustive strategy refused: {k} > {EXHAUSTIVE_LIMIT} support rectangles"
            )
        best_mask, best_val = 0, -1.0
        for mask in range(1, 1 << k):
            v = ratio(mask)
            if v > best_val:
                best_val, best_mask = v, mask
        chosen = [support[i] for i in range(k) if best_mask >> i & 1]
        return BmoEstimate(best_val, RectCollection(chosen), "exhaustive")

    # greedy downset
    mask = 0
    best_val, best_mask = -1.0, 0
    remaining = set(range(k))
    while remaining:
        cand_best, cand_val = None, -1.0
        for i in remaining:
            v = ratio(mask | 1 << i)
            if v > cand_val:
                cand_val, cand_best = v, i
        if mask and cand_val <= best_val:
            break
        mask |= 1 << cand_best
        remaining.discard(cand_best)
        if cand_val > best_val:
            best_val, best_mask = cand_val, mask
    if best_val >= single.value:
        chosen = [support[i] for i in range(k) if best_mask >> i & 1]
        return BmoEstimate(best_val, RectCollection(chosen), "greedy-downset")
    # fall back to the single-rectangle witness so the dominance chain holds
    return BmoEstimate(single.value, single.witness, "greedy-downset")


def frozen_classes(c: WaveletCoeffs) -> dict[tuple[int, GridInterval], list[DyadicRectangle]]:
    """Support rectangles grouped by (frozen coordinate, frozen side)."""
    out: dict[tuple[int, GridInterval], list[DyadicRectangle]] = {}
    for r in c.data:
        for coord in range(1, c.n + 1):
            out.setdefault((coord, r.sides[coord - 1]), []).append(r)
    return out


def bmo_minus1(c: WaveletCoeffs, strategy: str = "exhaustive") -> BmoEstimate:
    """Supremum over one-frozen-coordinate collections.

    For each (coordinate k, interval I), the inner problem is the
    (n-1)-dimensional estimate over the class {R : R_k = I}; the full class
    is always included as a candidate witness.
    """
    if c.n < 2:
        raise ValueError("the one-frozen-coordinate norm needs n >= 2")
    if not c.data:
        return BmoEstimate(0.0, None, "frozen-coordinate")
    best_val, best_witness = -1.0, None
    for (coord, side), rects in frozen_classes(c).items():
        inner = WaveletCoeffs(c.n - 1, c.N)
        back = {}
        for r in rects:
            rest = tuple(s for i, s in enumerate(r.sides) if i != coord - 1)
            rr = DyadicRectangle(rest)
            inner[rr] = inner[rr] + c.data[r]  # distinct rests; no collisions
            back[rr] = r
        # candidate subsets of the class
        cand_subsets: list[list[DyadicRectangle]] = [list(back)]
        if c.n - 1 == 1:
            est = _one_dim_exact(inner)
            if est is not None:
                sub = [rr for rr in back if est[1].contains_box(rr.box())]
                if sub:
                    cand_subsets.append(sub)
        else:
            try:
                est = bmo_estimate(inner, strategy if strategy != "single-rect" else "greedy-downset")
                if isinstance(est.witness, RectCollection):
                    cand_subsets.append(list(est.witness.rects))
            except ValueError:
                pass  # exhaustive refusal: keep the full-class candidate
        for sub in cand_subsets:
            full = [back[rr] for rr in sub]
            sh = RectCollection(full).shadow
            total = sum(abs(c.data[r]) ** 2 for r in full)
            val = math.sqrt(total / float(sh.measure))
            if val > best_val:
                best_val = val
                best_witness = RectCollection(full)
    return BmoEstimate(best_val, best_witness, "frozen-coordinate")


def _one_dim_exact(c: WaveletCoeffs) -> Optional[tuple[float, OpenSet]]:
    """Exact 1-D supremum: attained on a single dyadic interval."""
    if not c.data:
        return None
    est = _single_rect_estimate(c)
    if est.witness is None:
        return None
    return est.value, est.witness_set()


def john_nirenberg_check(
    weights: dict[DyadicRectangle, Fraction],
    W: OpenSet,
    p: Fraction,
    precheck_sets: Iterable[OpenSet] = (),
) -> float:
    """|| sum_{R ⊆ W} (a_R/|R|) 1_R ||_p / |W|^{1/p} for nonnegative weights.

    The Carleson packing condition sum_{R ⊆ W'} a_R <= |W'| is verified for
    every supplied test set; a violation raises CarlesonViolation.
    """
    for wp in precheck_sets:
        packed = sum(
            (Fraction(a) for r, a in weights.items() if wp.contains_box(r.box())),
            Fraction(0),
        )
        if packed > wp.measure:
            raise CarlesonViolation(
                f"packing {packed} exceeds |W'| = {wp.measure}", wp
            )
    inside = [(r, Fraction(a)) for r, a in weights.items() if W.contains_box(r.box())]
    if not inside:
        return 0.0
    n = W.n
    cuts = []
    cut_source = [r.box() for r, _ in inside] + list(W.boxes)
    for i in range(n):
        cuts.append(sorted({e for b in cut_source for e in b.sides[i]}))
    p = Fraction(p)

    def rec(i, cell):
        if i == n:
            box = Box(tuple(cell))
            val = Fraction(0)
            for r, a in inside:
                if r.box().contains_box(box):
                    val += a / r.volume
            if val > 0:
                rec.acc += float(box.volume) * float(val) ** float(p)
            return
        for a, b in zip(cuts[i], cuts[i][1:]):
            rec(i + 1, cell + [(a, b)])

    rec.acc = 0.0
    rec(0, [])
    return (rec.acc ** (1.0 / float(p))) / float(W.measure) ** (1.0 / float(p))
