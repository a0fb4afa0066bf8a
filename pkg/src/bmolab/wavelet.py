"""Discrete analytic wavelet system on the torus model Z_N per coordinate.

The family is built in the frequency domain.  Scale j occupies the integer
band ``[ceil(4*2^j/3), ceil(4*2^(j+1)/3))``, which sits inside the classical
band ``[2/3, 8/3] * 2^j``; consecutive bands are disjoint, which is what makes
exact orthonormality achievable at finite N (overlapping analytic bands
cannot support an orthonormal set of full translation families here).  Inside
each band the window is a smooth polynomial-ramp taper arranged so that the
band's periodization over the 2^j-residue lattice is exactly flat; the 2^j
translates of the window are then orthonormal, and distinct scales are
orthogonal outright.

Functions use the Lebesgue-normalized inner product
``<u, v> = N^{-n} sum u * conj(v)``, so wavelets have unit L2 norm and
Parseval holds against DFT coefficients ``u_hat = fft(u) / N^n``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .dyadic import (
    Box,
    DyadicRectangle,
    GridInterval,
    PLAIN,
    RectCollection,
    plain_interval,
    side_from_text,
    side_to_text,
)


def meyer_ramp(x: np.ndarray) -> np.ndarray:
    """Classical smooth ramp: 0 for x<=0, 1 for x>=1, C^3 join."""
    x = np.clip(x, 0.0, 1.0)
    return x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)


def band_edges(j: int) -> tuple[int, int]:
    """Integer frequency band assigned to scale j."""
    lo = -((-4 * 2**j) // 3)  # ceil(4*2^j/3)
    hi = -((-4 * 2 ** (j + 1)) // 3)
    return lo, hi


# ---------------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------------


@dataclass
class GridFunction:
    """Complex function on Z_N^n.  `values` is an n-dim complex array."""

    n: int
    N: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.N,) * self.n:
            raise ValueError("value array shape does not match (N,)*n")

    @classmethod
    def zero(cls, n: int, N: int) -> "GridFunction":
        return cls(n, N, np.zeros((N,) * n, dtype=np.complex128))

    @classmethod
    def from_freq(cls, n: int, N: int, freq: np.ndarray) -> "GridFunction":
        vals = np.fft.ifftn(np.asarray(freq, dtype=np.complex128)) * (N**n)
        return cls(n, N, vals)

    def freq(self) -> np.ndarray:
        """DFT coefficients u_hat(xi) = <u, e_xi>, xi indexed 0..N-1 per axis."""
        return np.fft.fftn(self.values) / (self.N**self.n)

    def inner(self, other: "GridFunction") -> complex:
        return complex(
            np.vdot(other.values, self.values) / (self.N**self.n)
        )  # <self, other>

    def norm2(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))

    def norm_p(self, p: float) -> float:
        return float(np.mean(np.abs(self.values) ** p) ** (1.0 / p))

    def __add__(self, other):
        return GridFunction(self.n, self.N, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.n, self.N, self.values - other.values)

    def __mul__(self, scalar):
        return GridFunction(self.n, self.N, self.values * scalar)

    def to_bytes(self) -> bytes:
        header = struct.pack("<QQ", self.n, self.N)
        data = self.values.astype(np.complex64).tobytes()
        return header + data

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        n, N = struct.unpack("<QQ", blob[:16])
        arr = np.frombuffer(blob[16:], dtype=np.complex64).reshape((N,) * n)
        return cls(int(n), int(N), arr.astype(np.complex128))


# ---------------------------------------------------------------------------
# the family
# ---------------------------------------------------------------------------


@dataclass
class WaveletFamily:
    """Orthonormal analytic family with one atom per (scale, translation)."""

    N: int
    n: int
    scales: tuple[int, ...]
    labels: tuple[tuple[int, int], ...]          # (j, m) per 1-D atom
    atoms_freq: np.ndarray                       # (num_atoms, N) complex
    gram_deviation: float

    @property
    def num_atoms(self) -> int:
        return len(self.labels)

    def label_index(self, j: int, m: int) -> int:
        return self._index[(j, m)]

    def __post_init__(self):
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    def atom_freq(self, j: int, m: int) -> np.ndarray:
        return self.atoms_freq[self._index[(j, m)]]

    def atom_space(self, j: int, m: int) -> np.ndarray:
        return np.fft.ifft(self.atom_freq(j, m)) * self.N

    def interval_label(self, side: GridInterval) -> tuple[int, int]:
        """Map a plain dyadic interval in [0,1) to its (scale, translation)."""
        if not side.grid.is_plain:
            raise ValueError("wavelet rectangles use plain dyadic sides")
        j = -side.k
        if j not in self._scaleset:
            raise ValueError(f"side length 2^{side.k} outside admissible scales")
        m = side.j
        if not (0 <= m < 2**j):
            raise ValueError("side translation outside [0,1)")
        return (j, m)

    @property
    def _scaleset(self):
        return set(self.scales)

    def admissible_sides(self) -> list[GridInterval]:
        return [
            plain_interval(j, m) for j in self.scales for m in range(2**j)
        ]

    def admissible_rectangles(self) -> list[DyadicRectangle]:
        sides = self.admissible_sides()

        def rec(i):
            if i == 0:
                return [()]
            return [t + (s,) for t in rec(i - 1) for s in sides]

        return [DyadicRectangle(t) for t in rec(self.n)]

    def rect_freq(self, rect: DyadicRectangle) -> np.ndarray:
        """Tensor-product frequency array of v_R (n-dim)."""
        axes = [self.atom_freq(*self.interval_label(s)) for s in rect.sides]
        out = axes[0]
        for a in axes[1:]:
            out = np.multiply.outer(out, a)
        return out

    def rect_function(self, rect: DyadicRectangle) -> GridFunction:
        return GridFunction.from_freq(self.n, self.N, self.rect_freq(rect))


def build_family(N: int, n: int) -> WaveletFamily:
    """Construct the analytic family; raises if N cannot host two scales."""
    if N < 32 or N & (N - 1) != 0:
        raise ValueError("N must be a power of two, N >= 32")
    scales = []
    j = 0
    while band_edges(j)[1] <= N // 2:
        scales.append(j)
        j += 1
    if len(scales) < 2:
        raise ValueError(f"N={N} too small to host two scales")

    atoms = []
    labels = []
    for j in scales:
        lo, hi = band_edges(j)
        L = hi - lo
        D = L - 2**j
        assert 0 <= D <= 2**j, (j, lo, hi)
        w2 = np.zeros(N)  # squared window
        base = 2.0 ** (-j)
        for i in range(L):
            xi = lo + i
            if i < D:
                t = (i + 0.5) / D
                w2[xi] = base * np.sin(0.5 * np.pi * meyer_ramp(t)) ** 2
            elif i < 2**j:
                w2[xi] = base
            else:  # D > 0 whenever this branch is reachable (L > 2^j)
                t = ((i - 2**j) + 0.5) / D
                w2[xi] = base * np.cos(0.5 * np.pi * meyer_ramp(t)) ** 2
        window = np.sqrt(w2)
        xi_idx = np.arange(N)
        for m in range(2**j):
            phase = np.exp(-2j * np.pi * xi_idx * m / 2**j)
            atoms.append(window * phase)
            labels.append((j, m))
    atoms_arr = np.array(atoms)
    gram = atoms_arr @ atoms_arr.conj().T
    deviation = float(np.max(np.abs(gram - np.eye(len(labels)))))
    fam = WaveletFamily(
        N=N,
        n=n,
        scales=tuple(scales),
        labels=tuple(labels),
        atoms_freq=atoms_arr,
        gram_deviation=deviation,
    )
    if deviation > 1e-10:
        raise AssertionError(f"family failed orthonormality check: {deviation}")
    return fam


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


class WaveletCoeffs:
    """Finitely supported map from dyadic rectangles to complex coefficients."""

    __slots__ = ("n", "N", "data")

    def __init__(self, n: int, N: int, data: Optional[dict] = None):
        self.n = n
        self.N = N
        self.data: dict[DyadicRectangle, complex] = dict(data or {})

    def __getitem__(self, r: DyadicRectangle) -> complex:
        return self.data.get(r, 0j)

    def __setitem__(self, r: DyadicRectangle, v: complex):
        if r.n != self.n:
            raise ValueError("rectangle dimension mismatch")
        if v == 0:
            self.data.pop(r, None)
        else:
            self.data[r] = complex(v)

    def __iter__(self):
        return iter(sorted(self.data))

    def __len__(self):
        return len(self.data)

    def items(self):
        return [(r, self.data[r]) for r in sorted(self.data)]

    def support(self) -> Optional[RectCollection]:
        if not self.data:
            return None
        return RectCollection(self.data.keys())

    def scaled(self, t: complex) -> "WaveletCoeffs":
        return WaveletCoeffs(self.n, self.N, {r: t * v for r, v in self.data.items()})

    def restrict(self, rects: Iterable[DyadicRectangle]) -> "WaveletCoeffs":
        keep = set(rects)
        return WaveletCoeffs(
            self.n, self.N, {r: v for r, v in self.data.items() if r in keep}
        )

    def total_energy(self) -> float:
        return float(sum(abs(v) ** 2 for v in self.data.values()))

    def to_json_obj(self) -> list:
        return [
            {
                "rect": "x".join(side_to_text(s) for s in r.sides),
                "re": v.real,
                "im": v.imag,
            }
            for r, v in self.items()
        ]

    @classmethod
    def from_json_obj(cls, obj: list, n: int, N: int) -> "WaveletCoeffs":
        data = {}
        for row in obj:
            sides = tuple(side_from_text(p) for p in row["rect"].split("x"))
            data[DyadicRectangle(sides)] = complex(row["re"], row["im"])
        return cls(n, N, data)

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def loads(cls, text: str, n: int, N: int) -> "WaveletCoeffs":
        return cls.from_json_obj(json.loads(text), n, N)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _coeff_tensor(f: GridFunction, fam: WaveletFamily) -> np.ndarray:
    """All coefficients <f, v_R> as an n-dim (num_atoms,)*n tensor."""
    if (f.n, f.N) != (fam.n, fam.N):
        raise ValueError("grid mismatch between function and family")
    t = f.freq()
    for axis in range(fam.n):
        # original axis `axis` sits at position `axis` at this step; tensordot
        # moves the new atom axis to the front, so the final order is reversed
        t = np.tensordot(fam.atoms_freq.conj(), t, axes=([1], [axis]))
    return t.transpose(tuple(range(fam.n))[::-1])


def analyze(f: GridFunction, fam: WaveletFamily) -> WaveletCoeffs:
    """Coefficients <f, v_R> over all admissible rectangles."""
    t = _coeff_tensor(f, fam)
    out = WaveletCoeffs(fam.n, fam.N)
    sides_by_index = [plain_interval(j, m) for (j, m) in fam.labels]
    it = np.nditer(t, flags=["multi_index"])
    for val in it:
        v = complex(val)
        if abs(v) > 0:
            sides = tuple(sides_by_index[i] for i in it.multi_index)
            out[DyadicRectangle(sides)] = v
    return out


def synthesize(c: WaveletCoeffs, fam: WaveletFamily) -> GridFunction:
    """Sum of c(R) * v_R."""
    if (c.n, c.N) != (fam.n, fam.N):
        raise ValueError("grid mismatch between coefficients and family")
    freq = np.zeros((fam.N,) * fam.n, dtype=np.complex128)
    for r, v in c.data.items():
        freq += v * fam.rect_freq(r)
    return GridFunction.from_freq(fam.n, fam.N, freq)


def rect_cell_slices(r: DyadicRectangle, N: int) -> tuple[slice, ...]:
    """Grid-cell slices covered by a rectangle inside [0,1)^n."""
    slices = []
    for s in r.sides:
        j = -s.k
        width = N >> j
        if width << j != N:
            raise ValueError("rectangle finer than the grid")
        start = s.j * width
        slices.append(slice(start, start + width))
    return tuple(slices)


def square_function(c: WaveletCoeffs, fam: WaveletFamily) -> GridFunction:
    """S(x) = sqrt( sum |c(R)|^2 / |R| * 1_R(x) ) sampled on the grid."""
    vals = np.zeros((fam.N,) * fam.n)
    for r, v in c.data.items():
        vals[rect_cell_slices(r, fam.N)] += abs(v) ** 2 / float(r.volume)
    return GridFunction(fam.n, fam.N, np.sqrt(vals).astype(np.complex128))


def localization_constant(fam: WaveletFamily) -> float:
    """Measured constant C in |w_I(x)| <= C |I|^{-1/2} (1 + dist(x,I)/|I|)^{-2}."""
    worst = 0.0
    xs = np.arange(fam.N) / fam.N
    for (j, m) in fam.labels:
        w = fam.atom_space(j, m)
        length = 2.0**-j
        lo, hi = m * length, (m + 1) * length
        # torus distance to the interval
        da = np.abs(xs - lo)
        da = np.minimum(da, 1 - da)
        db = np.abs(xs - hi)
        db = np.minimum(db, 1 - db)
        inside = (xs >= lo) & (xs < hi)
        dist = np.where(inside, 0.0, np.minimum(da, db))
        bound = length**-0.5 * (1 + dist / length) ** -2.0
        worst = max(worst, float(np.max(np.abs(w) / bound)))
    return worst
