"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Budgets are wall-clock ceilings from the build contract; tolerances are
pinned here and nowhere else.  Frozen constants come from the committed
fixture (regenerate with `bmolab experiment --freeze`).
"""

import itertools
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from bmolab import dyadic, hankel, journe, maximal, norms, paraproduct, wavelet
from bmolab.dyadic import (
    OpenSet,
    PLAIN,
    RectCollection,
    box_from_pairs,
    dilate_rect,
    plain_interval,
    rect,
    shifted_family,
    verify_grid_nesting,
)
from bmolab.harness import (
    CANONICAL_EQUIVALENCE,
    ExperimentConfig,
    FIXTURE_BAND,
    equivalence_suite,
    journe_suite,
    load_frozen,
    run_equivalence,
    suite_subsets,
    _rng_for_trial,
)
from bmolab.journe import JourneConfig
from bmolab.norms import bmo_estimate, bmo_minus1
from bmolab.paraproduct import Deltas, build_UVW, infer_J, partition_pairs
from bmolab.wavelet import WaveletCoeffs, build_family, synthesize

FROZEN = load_frozen()


def report(criterion: int, ok: bool, detail: str = "", elapsed: float = 0.0):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion-{criterion:02d}] {status} ({elapsed:.2f}s) {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def timed(budget):
    def wrap(fn):
        def inner(*a, **k):
            t0 = time.time()
            fn(*a, t0=t0, **k)
            elapsed = time.time() - t0
            assert elapsed < budget, f"budget exceeded: {elapsed:.1f}s >= {budget}s"

        inner.__name__ = fn.__name__
        return inner

    return wrap


# -- 1: grid correctness ------------------------------------------------------


@timed(5.0)
def test_criterion_01_grid_nesting(t0=0.0):
    checked = 0
    ok = True
    for d in range(1, 5):
        for g in shifted_family(d):
            ok = ok and verify_grid_nesting(g, 6)
            checked += 1
    ok = ok and verify_grid_nesting(PLAIN, 6)
    report(1, ok, f"{checked + 1} grids, depth 6", time.time() - t0)


# -- 2: shifted-grid membership ----------------------------------------------


@timed(5.0)
def test_criterion_02_shifted_membership(t0=0.0):
    count = 0
    ok = True
    for d in range(1, 5):
        for depth in range(0, 7):
            for idx in range(1 << depth):
                ok = ok and dyadic.shifted_membership(plain_interval(depth, idx), d)
                count += 1
            # a few translates outside the unit window
            for idx in (-3, -1, 1 << depth, (1 << depth) + 5):
                ok = ok and dyadic.shifted_membership(plain_interval(depth, idx), d)
                count += 1
    report(2, ok, f"{count} membership checks exact", time.time() - t0)


# -- 3: superlevel sets equal brute force --------------------------------------


def _brute_superlevel_1d(u, grids, lam, floor):
    from bmolab.dyadic import grid_interval_endpoints

    ivals = [b.sides[0] for b in u.boxes]
    measure = sum(b - a for a, b in ivals)
    span_lo = min(a for a, _ in ivals)
    span_hi = max(b for _, b in ivals)
    hits = []
    for g in grids:
        k = -40
        while True:
            ell = g.scale_length(k)
            if ell >= measure / lam:
                break
            if ell >= floor:
                lo0 = (span_lo / ell).__floor__() - 2
                hi0 = (span_hi / ell).__ceil__() + 2
                for j in range(lo0, hi0 + 1):
                    lo, hi = grid_interval_endpoints(g, k, j)
                    inter = F(0)
                    for a, b in ivals:
                        x, y = max(a, lo), min(b, hi)
                        if x < y:
                            inter += y - x
                    if inter > lam * ell:
                        hits.append(box_from_pairs((lo, hi)))
            k += 1
    return OpenSet(hits, 1) if hits else OpenSet.empty(1)


@timed(30.0)
def test_criterion_03_superlevel_brute_force(t0=0.0):
    trials_1d, trials_2d = 0, 0
    for t in range(70):
        rng = _rng_for_trial(31337, t)
        parts = []
        for _ in range(int(rng.integers(1, 6))):
            d = int(rng.integers(0, 9))
            j = int(rng.integers(0, 1 << d))
            parts.append(box_from_pairs((F(j, 1 << d), F(j + 1, 1 << d))))
        u = OpenSet(parts, 1)
        lam = [F(1, 3), F(1, 2), F(4, 5), F(9, 10)][t % 4]
        grids = (PLAIN,) if t % 3 else shifted_family(1 + t % 2)
        floor = F(1, 512)
        ours = maximal.superlevel_grid(u, grids, lam, min_len=floor)
        brute = _brute_superlevel_1d(u, grids, lam, floor)
        assert ours == brute
        trials_1d += 1
    for t in range(30):
        rng = _rng_for_trial(771, t)
        boxes = []
        for _ in range(int(rng.integers(1, 4))):
            d1, d2 = int(rng.integers(0, 5)), int(rng.integers(0, 5))
            j1, j2 = int(rng.integers(0, 1 << d1)), int(rng.integers(0, 1 << d2))
            boxes.append(
                box_from_pairs(
                    (F(j1, 1 << d1), F(j1 + 1, 1 << d1)),
                    (F(j2, 1 << d2), F(j2 + 1, 1 << d2)),
                )
            )
        u = OpenSet(boxes, 2)
        lam = [F(1, 2), F(2, 3), F(7, 8)][t % 3]
        coord = 1 + t % 2
        floor = F(1, 64)
        ours = maximal.superlevel_directional(u, coord, PLAIN, lam, min_len=floor)
        # fiber oracle
        other = 3 - coord
        cuts = sorted({b.sides[other - 1][i] for b in u.boxes for i in (0, 1)})
        expect = []
        for a, b in zip(cuts, cuts[1:]):
            mid = (a + b) / 2
            fiber = [
                bx.sides[coord - 1]
                for bx in u.boxes
                if bx.sides[other - 1][0] <= mid < bx.sides[other - 1][1]
            ]
            if not fiber:
                continue
            f1 = OpenSet([dyadic.Box((p,)) for p in fiber], 1)
            sup = _brute_superlevel_1d(f1, (PLAIN,), lam, floor)
            for piece in sup.boxes:
                sides = [None, None]
                sides[coord - 1] = piece.sides[0]
                sides[other - 1] = (a, b)
                expect.append(dyadic.Box(tuple(sides)))
        expected = OpenSet(expect, 2) if expect else OpenSet.empty(2)
        assert ours == expected
        trials_2d += 1
    report(3, True, f"{trials_1d} 1-D + {trials_2d} 2-D exact matches", time.time() - t0)


# -- 4 & 5: covering-lemma suite ----------------------------------------------

_JOURNE_CACHE = {}


def _journe_results():
    if "data" not in _JOURNE_CACHE:
        results = []
        for coll, delta in journe_suite():
            cfg = JourneConfig(delta, F(1, 2))
            V1 = journe.enlarge(coll, cfg)
            subs = suite_subsets(coll, 20240719)
            fsr = journe.few_small_ratio(coll, V1, F(1, 2), subs)
            Vn, rep = journe.journe_full(coll, cfg)
            results.append((coll, delta, V1, fsr, Vn, rep))
        _JOURNE_CACHE["data"] = results
    return _JOURNE_CACHE["data"]


@timed(120.0)
def test_criterion_04_few_small(t0=0.0):
    frozen_k = FROZEN["enlarge_K"]
    frozen_c = {F(1, 3): FROZEN["few_small_C_1_3"], F(1, 5): FROZEN["few_small_C_1_5"]}
    worst_k, worst_ratio = 0.0, {F(1, 3): 0.0, F(1, 5): 0.0}
    for coll, delta, V1, fsr, _, _ in _journe_results():
        assert V1.contains_set(coll.shadow)
        ratio = float(V1.measure / coll.shadow.measure)
        denom = float(delta) * abs(math.log2(float(delta)))
        worst_k = max(worst_k, (ratio - 1) / denom)
        worst_ratio[delta] = max(worst_ratio[delta], fsr)
    ok = worst_k <= frozen_k * (1 + FIXTURE_BAND) + 1e-9
    for delta, c in frozen_c.items():
        ok = ok and worst_ratio[delta] <= c * (1 + FIXTURE_BAND)
    report(
        4,
        ok,
        f"200 collections; K={worst_k:.4f} (frozen {frozen_k:.4f}); "
        f"C(1/3)={worst_ratio[F(1,3)]:.3f}, C(1/5)={worst_ratio[F(1,5)]:.3f}",
        time.time() - t0,
    )


@timed(240.0)
def test_criterion_05_journe_uniform(t0=0.0):
    failures = 0
    measure_viol = 0
    rect_count = 0
    for coll, delta, _, _, Vn, rep in _journe_results():
        if Vn.measure > (1 + delta) ** coll.n * coll.shadow.measure:
            measure_viol += 1
        for r in coll:
            t = rep.traces[r]
            rect_count += 1
            if t.emb < 1 or not Vn.contains_box(
                dilate_rect(r, t.emb, range(1, coll.n + 1))
            ):
                failures += 1
    ok = failures == 0 and measure_viol == 0
    report(
        5,
        ok,
        f"{rect_count} rectangles, {failures} containment failures, "
        f"{measure_viol} measure violations",
        time.time() - t0,
    )


# -- 6: wavelet certification ---------------------------------------------------


@timed(20.0)
def test_criterion_06_wavelets(t0=0.0):
    fam = build_family(64, 1)
    g1 = fam.atoms_freq @ fam.atoms_freq.conj().T
    dev1 = float(np.max(np.abs(g1 - np.eye(fam.num_atoms))))
    # tensor Gram for n = 2 factors through the 1-D Gram
    g2 = np.kron(g1, g1)
    dev2 = float(np.max(np.abs(g2 - np.eye(fam.num_atoms**2))))
    # analytic support exact
    analytic = all(
        row[0] == 0 and np.all(row[fam.N // 2 :] == 0) for row in fam.atoms_freq
    )
    # Parseval on random span elements
    rng = np.random.default_rng(99)
    fam2 = build_family(64, 2)
    worst_parseval = 0.0
    for _ in range(5):
        c = WaveletCoeffs(2, 64)
        sides = [plain_interval(j, m) for (j, m) in fam2.labels]
        for _ in range(40):
            i1, i2 = rng.integers(0, len(sides), size=2)
            r = rect(sides[int(i1)], sides[int(i2)])
            c[r] = complex(rng.standard_normal(), rng.standard_normal())
        f = synthesize(c, fam2)
        worst_parseval = max(
            worst_parseval,
            abs(f.norm2() ** 2 - sum(abs(v) ** 2 for _, v in c.items()))
            / max(1.0, f.norm2() ** 2),
        )
    ok = dev1 <= 1e-10 and dev2 <= 1e-10 and analytic and worst_parseval <= 1e-10
    report(
        6,
        ok,
        f"gram(1D)={dev1:.1e}, gram(2D)={dev2:.1e}, parseval={worst_parseval:.1e}",
        time.time() - t0,
    )


# -- 7: vanishing products -----------------------------------------------------


@timed(60.0)
def test_criterion_07_vanishing_products(t0=0.0):
    """Anti-analytic projection of v_{R'} conj(v_R) vanishes whenever some
    coordinate has |R_j| >= 4|R'_j| (band arithmetic; the classical safe
    margin is the factor 8).  Exhaustive over family pairs at N=64, n <= 2
    via the coordinate factorization of tensor products."""
    fam = build_family(64, 1)
    N = fam.N
    atoms = {lab: fam.atom_space(*lab) for lab in fam.labels}
    sf = hankel.signed_freqs(N)
    neg = sf < 0
    # 1-D table: ||P^-(w_{I'} conj w_I)||_2 for all ordered pairs
    table = {}
    violations = 0
    checked_pairs = 0
    for (jp, mp), wp in atoms.items():
        for (jr, mr), wr in atoms.items():
            prod = wp * np.conj(wr)
            freq = np.fft.fft(prod) / N
            val = math.sqrt(float(np.sum(np.abs(freq[neg]) ** 2)))
            table[(jp, mp, jr, mr)] = val
            # vanish when |I| >= 4|I'|  <=>  2^-jr >= 4 * 2^-jp  <=>  jp >= jr+2
            if jp >= jr + 2:
                checked_pairs += 1
                if val > 1e-10:
                    violations += 1
    # n = 2: exhaustive over rectangle pairs through the product structure
    labels = list(atoms)
    worst2 = 0.0
    checked2 = 0
    for a1, a2 in itertools.product(labels, repeat=2):
        for b1, b2 in itertools.product(labels, repeat=2):
            if a1[0] >= b1[0] + 2 or a2[0] >= b2[0] + 2:
                checked2 += 1
                norm2d = table[(a1[0], a1[1], b1[0], b1[1])] * table[
                    (a2[0], a2[1], b2[0], b2[1])
                ]
                # separability: P-minus-orthant norm is bounded by the
                # product with one vanishing factor
                v1 = table[(a1[0], a1[1], b1[0], b1[1])] if a1[0] >= b1[0] + 2 else 1.0
                v2 = table[(a2[0], a2[1], b2[0], b2[1])] if a2[0] >= b2[0] + 2 else 1.0
                if min(v1, v2) > 1e-10:
                    worst2 = max(worst2, min(v1, v2))
    ok = violations == 0 and worst2 <= 1e-10
    report(
        7,
        ok,
        f"{checked_pairs} 1-D + {checked2} 2-D dominated pairs, all vanish",
        time.time() - t0,
    )


# -- 8: commutator identity ----------------------------------------------------


@timed(60.0)
def test_criterion_08_commutator(t0=0.0):
    worst = 0.0
    for n, N in ((1, 32), (2, 32), (3, 16)):
        G = max(2, N // 16)
        for t in range(20):
            rng = _rng_for_trial(880 + n, t)
            freq = np.zeros((N,) * n, dtype=np.complex128)
            modes = [x for x in range(-G, G + 1) if x != 0]
            for _ in range(4):
                xi = tuple(int(modes[int(rng.integers(len(modes)))]) for _ in range(n))
                freq[tuple(x % N for x in xi)] += complex(
                    rng.standard_normal(), rng.standard_normal()
                )
            b = wavelet.GridFunction.from_freq(n, N, freq)
            nested = hankel.commutator_matrix(b, "nested", truncation=2)
            projsum = hankel.commutator_matrix(b, "projection-sum", truncation=2)
            scale = max(1.0, float(np.max(np.abs(nested.matrix))))
            worst = max(
                worst, float(np.max(np.abs(nested.matrix - projsum.matrix))) / scale
            )
    ok = worst <= 1e-12
    report(8, ok, f"60 symbols, worst entrywise delta {worst:.2e}", time.time() - t0)


# -- 9 & 13: norm equivalence sweep ---------------------------------------------

_EQ_CACHE = {}


def _equivalence_report():
    if "rep" not in _EQ_CACHE:
        cfg = ExperimentConfig(**CANONICAL_EQUIVALENCE)
        rep, code = None, None
        rep = run_equivalence(cfg)
        _EQ_CACHE["rep"] = rep
    return _EQ_CACHE["rep"]


@timed(120.0)
def test_criterion_09_upper_bound(t0=0.0):
    rep = _equivalence_report()
    c_star = FROZEN["equivalence_upper"]
    worst = max(rep["ratios"])
    ok = worst <= c_star * (1 + FIXTURE_BAND)
    report(
        9,
        ok,
        f"100 symbols; max ratio {worst:.4f} vs frozen {c_star:.4f} (+20%)",
        time.time() - t0,
    )


@timed(60.0)
def test_criterion_10_dominance_everywhere(t0=0.0):
    checked = 0
    for t in range(0, 40, 2):
        c = equivalence_suite(trials=40)[t]
        if len(c) == 0:
            continue
        s = bmo_estimate(c, "single-rect").value
        g = bmo_estimate(c, "greedy-downset").value
        e = bmo_estimate(c, "exhaustive").value
        m1 = bmo_minus1(c).value
        assert s <= g + 1e-12 and g <= e + 1e-12, "dominance chain broken"
        assert m1 <= e + 1e-10, "frozen-coordinate norm exceeded the full norm"
        checked += 1
    report(10, True, f"{checked} instances, chains exact", time.time() - t0)


# -- 11: weak factorization -----------------------------------------------------


@timed(60.0)
def test_criterion_11_weak_factorization(t0=0.0):
    fam = build_family(64, 2)
    sides = [plain_interval(j, m) for (j, m) in fam.labels]
    worst_resid, worst_pair = 0.0, 0.0
    for t in range(50):
        rng = _rng_for_trial(1111, t)
        frozen_side = sides[int(rng.integers(len(sides)))]
        coord = 1 + int(rng.integers(2))
        c = WaveletCoeffs(2, 64)
        for _ in range(int(rng.integers(1, 7))):
            other = sides[int(rng.integers(len(sides)))]
            pair = (
                (frozen_side, other) if coord == 1 else (other, frozen_side)
            )
            c[rect(*pair)] = complex(rng.standard_normal(), rng.standard_normal())
        pairs, bound = hankel.weak_factorization_witness(c, fam)
        psi = synthesize(c, fam)
        total = np.zeros_like(psi.values)
        for p, q in pairs:
            total += p.values * q.values
        scale = max(1.0, float(np.max(np.abs(psi.values))))
        worst_resid = max(worst_resid, float(np.max(np.abs(total - psi.values))) / scale)
        # pairing: <psi, b> with b = psi reproduces the coefficient mass
        ip = complex(np.vdot(psi.values, psi.values) / 64**2)
        mass = sum(abs(v) ** 2 for _, v in c.items())
        worst_pair = max(worst_pair, abs(ip - mass) / max(1.0, mass))
    ok = worst_resid <= 1e-6 and worst_pair <= 1e-10
    report(
        11,
        ok,
        f"50 instances; residual {worst_resid:.1e}, pairing {worst_pair:.1e}",
        time.time() - t0,
    )


# -- 12: paraproduct exact identities --------------------------------------------


@timed(120.0)
def test_criterion_12_paraproduct_identities(t0=0.0):
    fam = build_family(64, 2)
    bessel_worst = 0.0
    slack_viol = 0
    partition_viol = 0
    instances = 0
    for t in range(20):
        rng = _rng_for_trial(1212, t)
        cfg = ExperimentConfig(n=2, N=64, depth=3, seed=1212, trials=20, support=8)
        from bmolab.harness import generate_instance

        c = generate_instance(cfg, "coefficients", t)
        if len(c) == 0:
            continue
        est = bmo_estimate(c, "exhaustive")
        work = c.scaled(1.0 / est.value)
        data = build_UVW(work, Deltas(), JourneConfig(F(1, 3)))
        pu = synthesize(work.restrict(data.ucoll.rects), fam)
        mass_u = sum(abs(work[r]) ** 2 for r in data.ucoll)
        bessel_worst = max(
            bessel_worst,
            abs(mass_u - pu.norm2() ** 2) / max(1.0, mass_u),
        )
        mass_v = sum(abs(work[r]) ** 2 for r in data.vcoll)
        slack = float(data.v_set.measure - data.ucoll.shadow.measure)
        if mass_v > slack + 1e-10:
            slack_viol += 1
        # partition completeness by recount
        pair_sets = partition_pairs(data.u_d1, data.wcoll, data.v_set)
        seen = set()
        for ps in pair_sets:
            for pair in ps.pairs:
                if pair in seen:
                    partition_viol += 1
                seen.add(pair)
        expected = sum(
            1
            for _, urects in data.u_d1.items()
            for r in urects
            for rp in data.wcoll
            if infer_J(rp, r) not in (None, ())
        )
        if len(seen) != expected:
            partition_viol += 1
        instances += 1
    ok = bessel_worst <= 1e-10 and slack_viol == 0 and partition_viol == 0
    report(
        12,
        ok,
        f"{instances} instances; bessel {bessel_worst:.1e}, "
        f"{slack_viol} slack violations, {partition_viol} partition defects",
        time.time() - t0,
    )


# -- 13: two-sided equivalence sweep ---------------------------------------------


@timed(120.0)
def test_criterion_13_equivalence_bracket(t0=0.0):
    rep = _equivalence_report()
    lo = FROZEN["equivalence_lower"]
    hi = FROZEN["equivalence_upper"]
    outside = [
        r
        for r in rep["ratios"]
        if r < lo * (1 - FIXTURE_BAND) or r > hi * (1 + FIXTURE_BAND)
    ]
    ok = len(outside) == 0 and len(rep["ratios"]) >= 90
    report(
        13,
        ok,
        f"{len(rep['ratios'])} ratios within [{lo:.3f}, {hi:.3f}] band; "
        f"{len(outside)} outside",
        time.time() - t0,
    )
