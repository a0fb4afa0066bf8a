"""Covering-lemma constructions: the enlargement cascade, exact embeddedness,
the frozen-coordinate partition with its weighted-shadow ratio, the n-stage
induction producing a uniform-dilation embeddedness, and the one-fewer-
parameters weighting of coefficient families.

The superlevel cascade uses the absorbing variant (each stage contains its
input exactly), which is the discrete counterpart of the almost-everywhere
containment in the continuum; all containment claims below are then exact
half-open box statements verified by rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .dyadic import (
    Box,
    DyadicRectangle,
    GridId,
    GridInterval,
    OpenSet,
    PLAIN,
    RectCollection,
    S_GRIDS,
    cover_in_S,
    dilate_rect,
    grid_interval_endpoints,
    shifted_family,
)
from .maximal import superlevel_directional
from .wavelet import WaveletCoeffs


class NotEmbeddedError(ValueError):
    pass


@dataclass(frozen=True)
class JourneConfig:
    delta: Fraction
    epsilon: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0,1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def d(self) -> int:
        """Smallest d with 1/(2^d+1) <= delta."""
        d = 1
        while Fraction(1, 2**d + 1) > self.delta:
            d += 1
        return d

    @property
    def grid_delta(self) -> Fraction:
        """The grid shift actually used by the cascade thresholds."""
        return Fraction(1, 2**self.d + 1)


# ---------------------------------------------------------------------------
# enlargement cascade
# ---------------------------------------------------------------------------


def enlarge(coll, cfg: JourneConfig, coord: int = 1) -> OpenSet:
    """The enlargement of a collection's shadow.

    Applies the plain directional superlevel in every coordinate except the
    distinguished one (thresholds ``1 - delta^(2^j)`` with exponents
    cascading down to 4), then the union of d-shifted grids in the
    distinguished coordinate at threshold ``1 - delta/2``; every stage
    absorbs its input, so the result contains the shadow exactly.
    """
    if isinstance(coll, RectCollection):
        current = coll.shadow
    elif isinstance(coll, OpenSet):
        current = coll
    else:
        raise TypeError("expected a RectCollection or OpenSet")
    if current.is_empty():
        raise ValueError("empty collection has no enlargement")
    n = current.n
    if not (1 <= coord <= n):
        raise ValueError("distinguished coordinate out of range")
    delta = cfg.delta
    others = [j for j in range(n, 0, -1) if j != coord]
    # exponent 2^j assigned by cascade position: first processed gets 2^n,
    # the last plain stage gets 2^2
    for pos, j in enumerate(others):
        exponent = 2 ** (n - pos)
        lam = 1 - delta**exponent
        current = superlevel_directional(current, j, PLAIN, lam, absorb=True)
    lam = 1 - delta / 2
    current = superlevel_directional(
        current, coord, shifted_family(cfg.d), lam, absorb=True
    )
    return current


# ---------------------------------------------------------------------------
# embeddedness
# ---------------------------------------------------------------------------


def embeddedness(r, V: OpenSet, coords: Iterable[int]) -> Fraction:
    """sup{mu >= 1 : the mu-dilation of r in the listed coordinates lies in V}.

    Exact: containment can only change when a dilated face crosses a
    breakpoint of V, so the supremum is attained at one of finitely many
    rational candidates (dilations nest, hence containment is monotone).
    """
    box = r.box() if isinstance(r, DyadicRectangle) else r
    coords = sorted(set(coords))
    if not coords:
        raise ValueError("need at least one dilation coordinate")
    if not V.contains_box(box):
        raise NotEmbeddedError("rectangle is not contained in the open set")
    cands: set[Fraction] = set()
    for j in coords:
        lo, hi = box.sides[j - 1]
        c = (lo + hi) / 2
        h = (hi - lo) / 2
        bps = sorted({b.sides[j - 1][0] for b in V.boxes} | {b.sides[j - 1][1] for b in V.boxes})
        for bp in bps:
            if bp < c:
                mu = (c - bp) / h
            elif bp > c:
                mu = (bp - c) / h
            else:
                continue
            if mu >= 1:
                cands.add(mu)
    if not cands:
        return Fraction(1)
    ordered = sorted(cands)

    def ok(mu: Fraction) -> bool:
        return V.contains_box(box.dilate(mu, coords))

    # binary search for the largest contained candidate
    lo_i, hi_i = -1, len(ordered) - 1
    if ok(ordered[-1]):
        return ordered[-1]
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if ok(ordered[mid]):
            lo_i = mid
        else:
            hi_i = mid
    return ordered[lo_i] if lo_i >= 0 else Fraction(1)


# ---------------------------------------------------------------------------
# frozen-coordinate partition (single-dilation form)
# ---------------------------------------------------------------------------


@dataclass
class FPartition:
    """Shadows of embeddedness classes keyed by (frozen side, class index)."""

    coord: int
    cells: dict[tuple[GridInterval, int], OpenSet]
    members: dict[tuple[GridInterval, int], list[DyadicRectangle]]

    def weighted_total(self, epsilon: Fraction) -> float:
        total = 0.0
        for (_, k), cell in self.cells.items():
            total += 2.0 ** (-float(epsilon) * k) * float(cell.measure)
        return total


def _class_of(e: Fraction) -> int:
    """k >= 0 with 2^k <= e < 2^(k+1)."""
    k = 0
    while Fraction(2) ** (k + 1) <= e:
        k += 1
    return k


def few_small_partition(
    coll: RectCollection, V: OpenSet, first_coord: int = 1
) -> FPartition:
    """Group rectangles by frozen side and dyadic one-coordinate embeddedness
    class ``2^(k-1) <= emb < 2^k`` (k >= 1); cells carry exact shadows."""
    cells: dict[tuple[GridInterval, int], list[DyadicRectangle]] = {}
    for r in coll:
        e = embeddedness(r, V, [first_coord])
        k = _class_of(e) + 1  # 2^(k-1) <= e < 2^k
        key = (r.sides[first_coord - 1], k)
        cells.setdefault(key, []).append(r)
    shadows = {
        key: OpenSet([r.box() for r in rs], coll.n) for key, rs in cells.items()
    }
    return FPartition(first_coord, shadows, cells)


def few_small_ratio(
    coll: RectCollection,
    V: OpenSet,
    epsilon: Fraction,
    subsets: Sequence[Iterable[DyadicRectangle]],
    first_coord: int = 1,
) -> float:
    """max over subsets of [sum_k sum_I 2^{-eps k} |F(I,k,subset)|] / |sh(subset)|."""
    emb_cache = {r: embeddedness(r, V, [first_coord]) for r in coll}
    best = 0.0
    for sub in subsets:
        sub = list(sub)
        if not sub:
            continue
        cells: dict[tuple[GridInterval, int], list[Box]] = {}
        for r in sub:
            k = _class_of(emb_cache[r]) + 1
            cells.setdefault((r.sides[first_coord - 1], k), []).append(r.box())
        total = 0.0
        for (_, k), boxes in cells.items():
            total += 2.0 ** (-float(epsilon) * k) * float(OpenSet(boxes, coll.n).measure)
        sh = OpenSet([r.box() for r in sub], coll.n).measure
        best = max(best, total / float(sh))
    return best


# ---------------------------------------------------------------------------
# the n-stage uniform-dilation construction
# ---------------------------------------------------------------------------


@dataclass
class RectTrace:
    rect: DyadicRectangle
    betas: list[Fraction]
    gammabars: list[Fraction]
    covers: list[Optional[tuple[GridInterval, ...]]]  # per stage, coords < m
    emb: Fraction = Fraction(1)
    iota: int = 1
    contained: bool = False


@dataclass
class EmbeddingReport:
    config: JourneConfig
    traces: dict[DyadicRectangle, RectTrace]
    stage_sets: list[OpenSet]
    stage_counts: list[int]

    def emb(self, r: DyadicRectangle) -> Fraction:
        return self.traces[r].emb

    def iota(self, r: DyadicRectangle) -> int:
        return self.traces[r].iota

    def f_cells(
        self, rects: Iterable[DyadicRectangle]
    ) -> dict[tuple[GridInterval, int, int], list[DyadicRectangle]]:
        """F(I,k,m,·) classes keyed by (frozen side, class k, coordinate m),
        with 2^k <= Emb < 2^(k+1)."""
        out: dict[tuple[GridInterval, int, int], list[DyadicRectangle]] = {}
        for r in rects:
            t = self.traces[r]
            k = _class_of(t.emb)
            key = (r.sides[t.iota - 1], k, t.iota)
            out.setdefault(key, []).append(r)
        return out


def _cover_candidates(
    side: GridInterval, gamma_cap: Fraction
) -> list[tuple[GridInterval, Fraction, Fraction]]:
    """(interval, need, fit) for family intervals containing `side` with
    length at most gamma_cap * |side|.

    need = least gamma with candidate ⊆ gamma-dilation of side;
    fit  = greatest gamma with quarter-gamma-dilation of side ⊆ candidate.
    """
    lo, hi = side.interval()
    c = (lo + hi) / 2
    h = (hi - lo) / 2
    max_len = gamma_cap * side.length
    out = []
    for g in S_GRIDS:
        for b_off in range(g.d):
            # smallest scale exponent congruent to b_off with length >= |side|
            s = b_off
            while Fraction(2) ** s >= side.length:
                s -= g.d
            while Fraction(2) ** s < side.length:
                s += g.d
            while True:
                k = (s - b_off) // g.d
                ell = g.scale_length(k)
                if ell > max_len:
                    break
                shift = g.shift_at_scale(k)
                j0 = ((hi - ell) / ell - shift).__floor__()
                j1 = ((lo) / ell - shift).__ceil__()
                for j in range(j0, j1 + 1):
                    glo, ghi = grid_interval_endpoints(g, k, j)
                    if glo <= lo and hi <= ghi:
                        need = max((c - glo) / h, (ghi - c) / h)
                        fit = 4 * min((c - glo) / h, (ghi - c) / h)
                        if need <= gamma_cap and fit >= 1 and need <= fit:
                            out.append((GridInterval(g, k, j), need, fit))
                s += g.d
    return out


def _maximal_cover(
    cands: Sequence[tuple[GridInterval, Fraction, Fraction]], gamma: Fraction
) -> Optional[GridInterval]:
    """Longest family interval valid at exactly gamma (ties: leftmost, then
    grid order)."""
    best = None
    for gi, need, fit in cands:
        if need <= gamma <= fit:
            key = (-gi.length, gi.lo, gi.grid)
            if best is None or key < best[0]:
                best = (key, gi)
    return None if best is None else best[1]


def _stage_scan(
    r: DyadicRectangle,
    m: int,
    V: OpenSet,
    gamma_cap: Fraction,
    cand_per_coord: list[list[tuple[GridInterval, Fraction, Fraction]]],
) -> tuple[Fraction, Fraction, Optional[tuple[GridInterval, ...]]]:
    """Largest gamma in [1, gamma_cap] whose maximal covers keep at least
    gamma of coordinate-m dilation room in V.

    Returns (gammabar, beta, covers) with beta the dilation room of the
    cover rectangle evaluated at gammabar (post-step value at thresholds,
    which keeps beta <= gammabar on downward jumps; both behaviors keep the
    final uniform dilation inside V).
    """

    def covers_at(g: Fraction) -> Optional[tuple[GridInterval, ...]]:
        out = []
        for j in range(m - 1):
            cov = _maximal_cover(cand_per_coord[j], g)
            if cov is None:
                return None
            out.append(cov)
        return tuple(out)

    def rect_of(covers: tuple[GridInterval, ...]) -> DyadicRectangle:
        rr = r
        for j, cov in enumerate(covers, start=1):
            rr = rr.replace_side(j, cov)
        return rr

    def beta_at(covers) -> Optional[Fraction]:
        rr = rect_of(covers)
        if not V.contains_box(rr.box()):
            return None
        return embeddedness(rr, V, [m])

    points: set[Fraction] = {Fraction(1), gamma_cap}
    for cands in cand_per_coord:
        for _, need, fit in cands:
            for v in (need, fit):
                if 1 < v < gamma_cap:
                    points.add(v)
    pts = sorted(points)

    prev_covers: Optional[tuple[GridInterval, ...]] = None
    prev_beta: Optional[Fraction] = None
    for idx, g0 in enumerate(pts):
        covers0 = covers_at(g0)
        beta0 = beta_at(covers0) if covers0 is not None else None
        if covers0 is None or beta0 is None or beta0 < g0:
            # the supremum is g0, reached from below
            gamma_bar = g0
            if beta0 is not None:
                return gamma_bar, beta0, covers0  # post-jump value <= gamma_bar
            # fall back to the covers valid just below g0
            if prev_covers is None:
                raise AssertionError("no admissible gamma at the start of the scan")
            return gamma_bar, min(gamma_bar, prev_beta), prev_covers
        if idx == len(pts) - 1:
            return g0, beta0, covers0
        g1 = pts[idx + 1]
        mid = (g0 + g1) / 2
        covers_mid = covers_at(mid)
        beta_mid = beta_at(covers_mid) if covers_mid is not None else None
        if covers_mid is None or beta_mid is None or beta_mid <= g0:
            return g0, beta0, covers0
        if beta_mid < g1:
            return beta_mid, beta_mid, covers_mid
        prev_covers, prev_beta = covers_mid, beta_mid
    raise AssertionError("scan fell through")  # pragma: no cover


def journe_full(
    coll: RectCollection, cfg: JourneConfig
) -> tuple[OpenSet, EmbeddingReport]:
    """The n-stage induction: enlarge, measure one-coordinate room, expand
    that coordinate into family-interval covers, repeat; the final
    embeddedness is ``max(1, min_m beta^m / 16)`` and the dilation of every
    rectangle by it stays inside the final set exactly."""
    n = coll.n
    traces = {
        r: RectTrace(rect=r, betas=[], gammabars=[], covers=[]) for r in coll
    }
    current = coll
    stage_sets: list[OpenSet] = []
    stage_counts: list[int] = []
    V: Optional[OpenSet] = None
    for m in range(1, n + 1):
        V = enlarge(current, cfg, coord=m)
        stage_sets.append(V)
        stage_counts.append(len(current))
        # per-rectangle stage data for the original collection
        for r in coll:
            t = traces[r]
            if m == 1:
                beta = embeddedness(r, V, [1])
                t.betas.append(beta)
                t.gammabars.append(Fraction(1))
                t.covers.append(())
            else:
                gamma_cap = min(t.betas)
                if gamma_cap <= 1:
                    base = r
                    beta = (
                        embeddedness(base, V, [m])
                        if V.contains_box(base.box())
                        else Fraction(1)
                    )
                    t.betas.append(beta)
                    t.gammabars.append(Fraction(1))
                    t.covers.append(tuple(r.sides[:m - 1]))
                else:
                    cand_per_coord = [
                        _cover_candidates(r.sides[j], gamma_cap)
                        for j in range(m - 1)
                    ]
                    gamma_bar, beta, covers = _stage_scan(
                        r, m, V, gamma_cap, cand_per_coord
                    )
                    t.betas.append(beta)
                    t.gammabars.append(gamma_bar)
                    t.covers.append(covers)
        if m < n:
            # expand coordinate m of every member into all admissible covers
            new_rects: set[DyadicRectangle] = set()
            for member in current:
                emb_val = embeddedness(member, V, [m])
                side = member.sides[m - 1]
                for gi, need, fit in _cover_candidates(side, emb_val):
                    if need <= min(emb_val, fit):
                        new_rects.add(member.replace_side(m, gi))
            current = RectCollection(new_rects)
    assert V is not None
    report = EmbeddingReport(cfg, traces, stage_sets, stage_counts)
    for r in coll:
        t = traces[r]
        min_beta = min(t.betas)
        t.emb = max(Fraction(1), min_beta / 16)
        t.iota = 1 + min(range(n), key=lambda i: (t.betas[i], i))
        t.contained = V.contains_box(dilate_rect(r, t.emb, range(1, n + 1)))
        if not t.contained:
            raise AssertionError(
                f"uniform dilation escaped the enlargement for {r}"
            )
    return V, report


# ---------------------------------------------------------------------------
# coefficient weighting
# ---------------------------------------------------------------------------


def journe_bmo_weights(
    coeffs: WaveletCoeffs, coll: RectCollection, cfg: JourneConfig
) -> tuple[OpenSet, WaveletCoeffs, dict]:
    """Weight coefficients by Emb^{-(n+eps)} and report the norm comparison.

    The per-class inequality compares each embeddedness-homogeneous class's
    coefficient mass against the one-frozen-coordinate norm times the total
    measure of its frozen-side cells.
    """
    from .norms import bmo_estimate, bmo_minus1

    support = set(coeffs.data)
    if not support <= coll.rects:
        raise ValueError("coefficients are not supported on the collection")
    n = coll.n
    V, report = journe_full(coll, cfg)
    expo = float(n + cfg.epsilon)
    weighted = WaveletCoeffs(coeffs.n, coeffs.N)
    for r, v in coeffs.data.items():
        weighted[r] = v * float(report.emb(r)) ** (-expo)

    strategy = "exhaustive" if len(coeffs) <= 16 else "greedy-downset"
    bmo_w = bmo_estimate(weighted, strategy).value if len(weighted) else 0.0
    bmo_1 = bmo_minus1(coeffs).value if n >= 2 and len(coeffs) else 0.0

    classes: dict[int, list[DyadicRectangle]] = {}
    for r in support:
        k = _class_of(report.emb(r))
        classes.setdefault(k, []).append(r)
    class_rows = []
    for k, rects in sorted(classes.items()):
        cells = report.f_cells(rects)
        cell_measure = 0.0
        for (_, kk, m), rs in cells.items():
            cell_measure += float(OpenSet([r.box() for r in rs], n).measure)
        lhs = sum(abs(coeffs[r]) ** 2 for r in rects)
        rhs = bmo_1**2 * cell_measure
        class_rows.append(
            {
                "k": k,
                "count": len(rects),
                "coeff_mass": lhs,
                "cell_measure": cell_measure,
                "bound": rhs,
                "ok": lhs <= rhs * (1 + 1e-9) + 1e-12,
            }
        )
    ratio = (bmo_w / bmo_1) if bmo_1 > 0 else 0.0
    bound_report = {
        "bmo_weighted": bmo_w,
        "bmo_minus1": bmo_1,
        "ratio": ratio,
        "exponent": expo,
        "classes": class_rows,
        "V_measure": float(V.measure),
        "shadow_measure": float(coll.shadow.measure),
    }
    return V, weighted, bound_report


def probability_mass_check(values: Sequence[Fraction], eta: Fraction) -> bool:
    """For values in [0,1] with mean >= 1 - eta, the fraction below
    1 - sqrt(eta) is at most sqrt(eta) (used by the cascade's exponents)."""
    values = [Fraction(v) for v in values]
    if not values:
        return True
    mean = sum(values) / len(values)
    if mean < 1 - eta:
        raise ValueError("mean below 1 - eta; hypothesis violated")
    # compare without irrational arithmetic: fraction^2 <= eta  and
    # threshold check via squaring (1 - t)^2 >= ... handled by rational sqrt bound
    count = 0
    for v in values:
        # v < 1 - sqrt(eta)  <=>  (1 - v)^2 > eta (v <= 1)
        if v < 1 and (1 - v) ** 2 > eta:
            count += 1
    return Fraction(count, len(values)) ** 2 <= eta
