"""Signed frequency projections, Hankel and commutator matrices, duality
pairing, inner-outer factorization, and the weak-factorization witness.

The torus model keeps every product inside the working frequency window, so
cyclic convolution coincides with linear convolution and the algebraic
identities hold exactly (up to float roundoff).  The admissible subspace
excludes frequency 0 and Nyquist in every coordinate, making the signed
projections a complete orthogonal decomposition.

Sign convention: the coordinate Hilbert transform is ``H_j = P_j^- - P_j^+``,
which makes the iterated-commutator identity hold with the displayed sign;
the opposite convention only flips the global sign.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .dyadic import DyadicRectangle, GridInterval
from .wavelet import GridFunction, WaveletCoeffs, WaveletFamily, synthesize


class GuardBandError(ValueError):
    pass


def signed_freqs(N: int) -> np.ndarray:
    """Signed frequency of each DFT bin (0..N-1 -> -N/2..N/2-1)."""
    xi = np.arange(N)
    return np.where(xi < N // 2, xi, xi - N)


@dataclass(frozen=True)
class SignPattern:
    """A choice of half-plane sign per coordinate."""

    signs: tuple[int, ...]  # each +1 or -1

    def __post_init__(self):
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +-1")

    @property
    def n(self) -> int:
        return len(self.signs)

    @property
    def sgn(self) -> int:
        p = 1
        for s in self.signs:
            p *= s
        return p

    def negated(self) -> "SignPattern":
        return SignPattern(tuple(-s for s in self.signs))


def all_sign_patterns(n: int) -> list[SignPattern]:
    return [SignPattern(t) for t in itertools.product((1, -1), repeat=n)]


def plus_pattern(n: int) -> SignPattern:
    return SignPattern((1,) * n)


def minus_pattern(n: int) -> SignPattern:
    return SignPattern((-1,) * n)


def _axis_masks(N: int) -> dict[int, np.ndarray]:
    xi = signed_freqs(N)
    return {
        1: (xi > 0) & (xi < N // 2),
        -1: xi < 0,
    }


def admissibility_defect(f: GridFunction) -> float:
    """Mass on frequency 0 or Nyquist in some coordinate (should be ~0)."""
    freq = f.freq()
    xi = signed_freqs(f.N)
    bad = (xi == 0) | (xi == -(f.N // 2))
    defect = 0.0
    for axis in range(f.n):
        shape = [1] * f.n
        shape[axis] = f.N
        m = bad.reshape(shape)
        defect = max(defect, float(np.max(np.abs(freq * m))))
    return defect


def require_admissible(f: GridFunction, tol: float = 1e-12):
    d = admissibility_defect(f)
    if d > tol:
        raise ValueError(f"function has inadmissible frequency support (defect {d:.2e})")


def project_sigma(f: GridFunction, sigma: SignPattern) -> GridFunction:
    """Keep frequencies with sign sigma_j in coordinate j, zero the rest."""
    if sigma.n != f.n:
        raise ValueError("pattern dimension mismatch")
    require_admissible(f)
    freq = f.freq()
    masks = _axis_masks(f.N)
    for axis, s in enumerate(sigma.signs):
        shape = [1] * f.n
        shape[axis] = f.N
        freq = freq * masks[s].reshape(shape)
    return GridFunction.from_freq(f.n, f.N, freq)


def project_plus(f: GridFunction) -> GridFunction:
    return project_sigma(f, plus_pattern(f.n))


def project_minus(f: GridFunction) -> GridFunction:
    return project_sigma(f, minus_pattern(f.n))


def max_freq_extent(f: GridFunction, tol: float = 1e-13) -> int:
    """Largest |signed frequency| carrying mass above tol (sup over coords)."""
    freq = np.abs(f.freq())
    xi = np.abs(signed_freqs(f.N))
    ext = 0
    for axis in range(f.n):
        mass = freq
        for other in range(f.n):
            if other != axis:
                mass = mass.max(axis=other, keepdims=True)
        mass = mass.reshape(f.N)
        carrying = np.nonzero(mass > tol)[0]
        if len(carrying):
            ext = max(ext, int(xi[carrying].max()))
    return ext


# ---------------------------------------------------------------------------
# operator matrices
# ---------------------------------------------------------------------------


@dataclass
class OperatorMatrix:
    """Dense matrix with labelled frequency bases."""

    domain: tuple[tuple[int, ...], ...]
    codomain: tuple[tuple[int, ...], ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if self.matrix.shape != (len(self.codomain), len(self.domain)):
            raise ValueError("matrix shape does not match basis descriptors")


def operator_norm(A: OperatorMatrix | np.ndarray, tol: float = 1e-8) -> float:
    """Largest singular value; dense SVD up to 4096, power iteration above."""
    m = A.matrix if isinstance(A, OperatorMatrix) else np.asarray(A)
    if max(m.shape) <= 4096:
        if min(m.shape) == 0:
            return 0.0
        return float(np.linalg.svd(m, compute_uv=False)[0])
    # power iteration on A^H A with a deterministic start
    g = m.conj().T @ m
    v = np.ones(g.shape[0], dtype=np.complex128)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(10000):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        w /= nw
        if abs(nw - lam) <= tol * max(1.0, nw):
            lam = nw
            break
        lam, v = nw, w
    return float(math.sqrt(lam))


def _orthant_freqs(K: int, n: int, signs: tuple[int, ...]) -> list[tuple[int, ...]]:
    rng = range(1, K + 1)
    out = []
    for t in itertools.product(rng, repeat=n):
        out.append(tuple(s * x for s, x in zip(signs, t)))
    return out


def hankel_matrix(b: GridFunction, truncation: int) -> OperatorMatrix:
    """Matrix of f -> P^minus-orthant(conj(b) f) from the analytic exponential
    basis e_xi (xi in [1..K]^n) to the anti-analytic window.

    Entries are exact convolution values; the guard band requires
    max-frequency(b) + K <= N/2 - 1 so no product wraps around.
    """
    N, n = b.N, b.n
    K = int(truncation)
    ext = max_freq_extent(b)
    if ext + K > N // 2 - 1:
        raise GuardBandError(
            f"guard band violated: symbol extent {ext} + truncation {K} > N/2-1"
        )
    bhat = b.freq()
    domain = _orthant_freqs(K, n, (1,) * n)
    codomain = _orthant_freqs(K + ext, n, (-1,) * n)
    mat = np.zeros((len(codomain), len(domain)), dtype=np.complex128)
    for col, xi in enumerate(domain):
        for row, zeta in enumerate(codomain):
            diff = tuple((x - z) % N for x, z in zip(xi, zeta))
            mat[row, col] = np.conj(bhat[diff])
    return OperatorMatrix(tuple(domain), tuple(codomain), mat)


# ---------------------------------------------------------------------------
# commutators
# ---------------------------------------------------------------------------


def _freq_window(W: int, n: int) -> list[tuple[int, ...]]:
    """All frequency tuples with 0 < |xi_j| <= W."""
    vals = [x for x in range(-W, W + 1) if x != 0]
    return list(itertools.product(vals, repeat=n))


def commutator_matrix(
    b: GridFunction, method: str = "nested", truncation: Optional[int] = None
) -> OperatorMatrix:
    """Iterated commutator of multiplication by b with coordinate Hilbert
    transforms, as a matrix over the admissible truncation.

    nested: [...[[M_b, H_1], H_2], ..., H_n] with H_j = P_j^- - P_j^+.
    projection-sum: -2^n * sum_sigma sgn(sigma) P^{-sigma} M_b P^{sigma}.
    """
    if method not in ("nested", "projection-sum"):
        raise ValueError(f"unknown method {method!r}")
    N, n = b.N, b.n
    require_admissible(b)
    ext = max_freq_extent(b)
    K = truncation if truncation is not None else N // 8
    if ext + K > N // 2 - 1:
        raise GuardBandError(
            f"guard band violated: symbol extent {ext} + truncation {K} > N/2-1"
        )
    bhat = b.freq()
    domain = _freq_window(K, n)
    W = K + ext
    codomain = _freq_window(W, n)
    cod_index = {xi: i for i, xi in enumerate(codomain)}

    sf = signed_freqs(N)
    symbol_modes = [
        (tuple(int(sf[i]) for i in idx), bhat[tuple(idx)])
        for idx in np.argwhere(np.abs(bhat) > 1e-16)
    ]

    def mult_vec(vec: dict[tuple[int, ...], complex]) -> dict[tuple[int, ...], complex]:
        out: dict[tuple[int, ...], complex] = {}
        for eta, amp in symbol_modes:
            for xi, v in vec.items():
                tgt = tuple(x + e for x, e in zip(xi, eta))
                out[tgt] = out.get(tgt, 0j) + amp * v
        return out

    def hilbert_vec(vec, axis):
        out = {}
        for xi, v in vec.items():
            x = xi[axis]
            if x == 0:
                continue  # annihilated (kept off the admissible window anyway)
            out[xi] = (-v) if x > 0 else v
        return out

    def proj_vec(vec, axis, sign):
        return {
            xi: v
            for xi, v in vec.items()
            if (xi[axis] > 0) == (sign > 0) and xi[axis] != 0
        }

    def combine(vecs_a, vecs_b, sign=1):
        out = dict(vecs_a)
        for k, v in vecs_b.items():
            out[k] = out.get(k, 0j) + sign * v
        return out

    def nested_apply(vec):
        # C_1 = [M_b, H_1]; C_m = [C_{m-1}, H_m]
        def c_apply(m, v):
            if m == 0:
                return mult_vec(v)
            a = c_apply(m - 1, hilbert_vec(v, m - 1))
            bq = hilbert_vec(c_apply(m - 1, v), m - 1)
            return combine(a, bq, sign=-1)

        return c_apply(n, vec)

    def projsum_apply(vec):
        # (-2)^n * sum_sigma sgn(sigma) P^{-sigma} M_b P^sigma; with
        # H_j = P_j^- - P_j^+ this matches the nested commutator for every n
        # (for odd n the constant equals the displayed -2^n)
        total: dict[tuple[int, ...], complex] = {}
        for sigma in all_sign_patterns(n):
            cur = dict(vec)
            for axis, s in enumerate(sigma.signs):
                cur = proj_vec(cur, axis, s)
            cur = mult_vec(cur)
            for axis, s in enumerate(sigma.negated().signs):
                cur = proj_vec(cur, axis, s)
            total = combine(total, {k: sigma.sgn * v for k, v in cur.items()})
        return {k: (-2) ** n * v for k, v in total.items()}

    apply = nested_apply if method == "nested" else projsum_apply
    mat = np.zeros((len(codomain), len(domain)), dtype=np.complex128)
    for col, xi in enumerate(domain):
        for tgt, v in apply({xi: 1.0 + 0j}).items():
            if any(t == 0 for t in tgt):
                # compression to the admissible subspace: axis frequencies
                # are outside the working decomposition and are projected away
                continue
            row = cod_index.get(tgt)
            if row is None:
                if abs(v) > 1e-12:  # guard band should make this impossible
                    raise AssertionError("commutator output escaped the window")
                continue
            mat[row, col] = v
    return OperatorMatrix(tuple(domain), tuple(codomain), mat)


# ---------------------------------------------------------------------------
# duality pairing
# ---------------------------------------------------------------------------


def duality_pair(b: GridFunction, f: GridFunction, g: GridFunction) -> complex:
    """Discrete integral of conj(P^plus b) * f * g for analytic f, g."""
    for name, fn in (("f", f), ("g", g)):
        require_admissible(fn)
        resid = fn.values - project_plus(fn).values
        if np.max(np.abs(resid)) > 1e-10 * max(1.0, float(np.max(np.abs(fn.values)))):
            raise ValueError(f"{name} is not analytic")
    pb = project_plus(b)
    prod = np.conj(pb.values) * f.values * g.values
    return complex(prod.mean())


# ---------------------------------------------------------------------------
# inner-outer factorization (one dimension)
# ---------------------------------------------------------------------------


def inner_outer_factor(h: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Factor a 1-D analytic grid function into inner * outer.

    Works on the polynomial in z = e^{2 pi i x / N} determined by the
    positive-frequency coefficients: Blaschke factors for roots inside the
    unit disk, a monomial for the vanishing order at 0, and the zero-free
    remainder as the outer part.  Values are exact pointwise products.
    """
    if h.n != 1:
        raise ValueError("inner-outer factorization is one-dimensional")
    freq = h.freq()
    if np.max(np.abs(freq)) == 0:
        raise ValueError("zero input")
    xi = signed_freqs(h.N)
    neg_mass = float(np.max(np.abs(freq[xi < 0])))
    if neg_mass > 1e-10:
        raise ValueError("input is not analytic")
    coeffs = freq[: h.N // 2].copy()  # coefficient of z^k at index k
    nz = np.nonzero(np.abs(coeffs) > 1e-13)[0]
    if len(nz) == 0:
        raise ValueError("zero input")
    low, high = int(nz[0]), int(nz[-1])
    poly = coeffs[low : high + 1]  # q(z) with q(0) != 0, h = z^low q(z)
    roots = np.roots(poly[::-1]) if len(poly) > 1 else np.array([])
    inner_roots = roots[np.abs(roots) < 1 - 1e-12]
    outer_roots = roots[np.abs(roots) >= 1 - 1e-12]
    z = np.exp(2j * np.pi * np.arange(h.N) / h.N)

    inner_vals = z**low
    for r in inner_roots:
        inner_vals = inner_vals * (z - r) / (1 - np.conj(r) * z)
    lead = poly[-1]
    outer_vals = np.full(h.N, lead, dtype=np.complex128)
    for r in outer_roots:
        outer_vals = outer_vals * (z - r)
    for r in inner_roots:
        outer_vals = outer_vals * (1 - np.conj(r) * z)

    inner = GridFunction(1, h.N, inner_vals)
    outer = GridFunction(1, h.N, outer_vals)
    resid = float(
        np.max(np.abs(inner_vals * outer_vals - h.values))
        / max(1.0, float(np.max(np.abs(h.values))))
    )
    if resid > 1e-8:
        raise ArithmeticError(f"root-finding failed; reassembly residual {resid:.2e}")
    return inner, outer


def _analytic_sqrt(outer: GridFunction) -> GridFunction:
    """Pointwise square root of a zero-free-in-the-disk outer function,
    with the branch chosen continuously through the leading coefficient."""
    vals = outer.values
    if np.min(np.abs(vals)) == 0:
        raise ArithmeticError("outer factor vanishes on the grid")
    return GridFunction(1, outer.N, np.exp(0.5 * np.log(vals.astype(np.complex128))))


def split_factor(h: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Balanced split h = u1 * u2 with |u1| = |u2| = sqrt|h| pointwise."""
    inner, outer = inner_outer_factor(h)
    s = _analytic_sqrt(outer)
    u1 = GridFunction(1, h.N, inner.values * s.values)
    return u1, s


# ---------------------------------------------------------------------------
# weak factorization witness
# ---------------------------------------------------------------------------


def _frozen_coordinate(coll: Sequence[DyadicRectangle]) -> Optional[tuple[int, GridInterval]]:
    n = coll[0].n
    for coord in range(1, n + 1):
        sides = {r.sides[coord - 1] for r in coll}
        if len(sides) == 1:
            return coord, sides.pop()
    return None


def weak_factorization_witness(
    c: WaveletCoeffs, fam: WaveletFamily
) -> tuple[list[tuple[GridFunction, GridFunction]], float]:
    """Pairs (phi_k, psi_k) with sum phi_k psi_k = synthesize(c) and the
    projective tensor bound sum ||phi_k||_2 ||psi_k||_2.

    Requires a frozen coordinate (the one-fewer-parameters shape).  The base
    case splits both one-dimensional factors via inner-outer; deeper
    collections recurse when the reduced collection again has a frozen
    coordinate and otherwise fall back to one rank-one pair per rectangle.
    """
    support = sorted(c.data)
    if not support:
        return [], 0.0
    n = c.n
    frozen = _frozen_coordinate(support)
    if frozen is None:
        raise ValueError("collection does not have a frozen coordinate")
    coord, side = frozen
    if n == 1:
        raise ValueError("weak factorization needs n >= 2")

    w_1d = GridFunction(1, fam.N, fam.atom_space(*fam.interval_label(side)))
    u1, u2 = split_factor(w_1d)

    rest_axes = [i for i in range(n) if i != coord - 1]

    def embed(vec_1d_or_nd: np.ndarray, along_frozen: np.ndarray) -> np.ndarray:
        """outer product placing `along_frozen` on axis coord-1."""
        out = np.multiply.outer(along_frozen, vec_1d_or_nd)
        # move frozen axis into position coord-1
        return np.moveaxis(out, 0, coord - 1)

    if n == 2:
        # reduced object is a 1-D analytic function: exact inner-outer split
        reduced = np.zeros(fam.N, dtype=np.complex128)
        for r in support:
            lab = fam.interval_label(r.sides[rest_axes[0]])
            reduced += c[r] * fam.atom_space(*lab)
        q = GridFunction(1, fam.N, reduced)
        q1, q2 = split_factor(q)
        phi = GridFunction(n, fam.N, embed(q1.values, u1.values))
        psi = GridFunction(n, fam.N, embed(q2.values, u2.values))
        pairs = [(phi, psi)]
    else:
        reduced_coeffs = WaveletCoeffs(n - 1, fam.N)
        for r in support:
            rest = tuple(r.sides[i] for i in rest_axes)
            rr = DyadicRectangle(rest)
            reduced_coeffs[rr] = reduced_coeffs[rr] + c[r]
        sub_support = sorted(reduced_coeffs.data)
        if _frozen_coordinate(sub_support) is not None and n - 1 >= 2:
            fam_sub = fam if fam.n == n - 1 else _refamily(fam, n - 1)
            sub_pairs, _ = weak_factorization_witness(reduced_coeffs, fam_sub)
        else:
            # rank-one fallback: one pair per reduced rectangle
            fam_sub = fam if fam.n == n - 1 else _refamily(fam, n - 1)
            sub_pairs = []
            for rr in sub_support:
                first, rest = rr.sides[0], rr.sides[1:]
                a = GridFunction(
                    n - 1,
                    fam.N,
                    _tensor(fam_sub, (first,)) * reduced_coeffs[rr],
                )
                bfn = GridFunction(n - 1, fam.N, _tensor(fam_sub, rest, lead_axis=1))
                sub_pairs.append((a, bfn))
        pairs = []
        for a, bfn in sub_pairs:
            phi = GridFunction(n, fam.N, embed(a.values, u1.values))
            psi = GridFunction(n, fam.N, embed(bfn.values, u2.values))
            pairs.append((phi, psi))

    bound = sum(p.norm2() * q.norm2() for p, q in pairs)
    return pairs, float(bound)


def _refamily(fam: WaveletFamily, n: int) -> WaveletFamily:
    from .wavelet import build_family

    return build_family(fam.N, n)


def _tensor(fam: WaveletFamily, sides, lead_axis: int = 0) -> np.ndarray:
    """Space-domain tensor of atoms along the leading axes, ones elsewhere."""
    n = fam.n
    out = np.ones((fam.N,) * n, dtype=np.complex128)
    for offset, side in enumerate(sides):
        vec = fam.atom_space(*fam.interval_label(side))
        shape = [1] * n
        shape[lead_axis + offset] = fam.N
        out = out * vec.reshape(shape)
    return out
