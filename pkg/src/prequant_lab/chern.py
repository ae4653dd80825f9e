"""Exact-rational truncated Chern-Weil calculus.

Truncated polynomials in one formal degree-(1,1) generator carry Chern
characters of line-bundle powers, the virtual combinations that isolate
single powers of the curvature class, Todd factors, and the topological
constant of the almost-Hitchin normalization.  All arithmetic is exact
(``fractions.Fraction``); nothing here touches a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class DegreeCapError(ValueError):
    """Mismatched or unsupported truncation degree."""


@dataclass(frozen=True)
class TruncPoly:
    """Polynomial sum_m c_m x^m truncated above degree ``cap``.

    ``x`` is the formal (1,1) generator; coefficients are exact rationals.
    """

    cap: int
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        if self.cap < 0:
            raise DegreeCapError(f"negative degree cap {self.cap}")
        if len(self.coeffs) != self.cap + 1:
            raise DegreeCapError(
                f"expected {self.cap + 1} coefficients, got {len(self.coeffs)}"
            )

    @staticmethod
    def from_coeffs(cap: int, coeffs: Sequence) -> "TruncPoly":
        cs = [Fraction(c) for c in coeffs[: cap + 1]]
        cs += [Fraction(0)] * (cap + 1 - len(cs))
        return TruncPoly(cap, tuple(cs))

    @staticmethod
    def zero(cap: int) -> "TruncPoly":
        return TruncPoly.from_coeffs(cap, [])

    @staticmethod
    def one(cap: int) -> "TruncPoly":
        return TruncPoly.from_coeffs(cap, [1])

    @staticmethod
    def monomial(cap: int, degree: int, coeff=1) -> "TruncPoly":
        if degree > cap:
            return TruncPoly.zero(cap)
        cs = [Fraction(0)] * (cap + 1)
        cs[degree] = Fraction(coeff)
        return TruncPoly(cap, tuple(cs))

    def _check(self, other: "TruncPoly"):
        if self.cap != other.cap:
            raise DegreeCapError(f"degree caps differ: {self.cap} vs {other.cap}")

    def __add__(self, other: "TruncPoly") -> "TruncPoly":
        self._check(other)
        return TruncPoly(self.cap, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "TruncPoly") -> "TruncPoly":
        self._check(other)
        return TruncPoly(self.cap, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "TruncPoly":
        return TruncPoly(self.cap, tuple(-a for a in self.coeffs))

    def scale(self, c) -> "TruncPoly":
        c = Fraction(c)
        return TruncPoly(self.cap, tuple(c * a for a in self.coeffs))

    def __mul__(self, other: "TruncPoly") -> "TruncPoly":
        self._check(other)
        out = [Fraction(0)] * (self.cap + 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                if i + j > self.cap:
                    break
                out[i + j] += a * b
        return TruncPoly(self.cap, tuple(out))

    def min_degree(self) -> int:
        for m, c in enumerate(self.coeffs):
            if c != 0:
                return m
        return self.cap + 1

    def __str__(self) -> str:
        terms = [f"({c})x^{m}" for m, c in enumerate(self.coeffs) if c != 0]
        return " + ".join(terms) if terms else "0"


def ch_line_power(j: int, cap: int) -> TruncPoly:
    """Chern character of the j-th line-bundle power: e^{j x} truncated."""
    if cap < 0:
        raise DegreeCapError(f"negative degree cap {cap}")
    return TruncPoly(
        cap, tuple(Fraction(j**m, math.factorial(m)) for m in range(cap + 1))
    )


def vandermonde(n: int) -> list[list[Fraction]]:
    """(n+2)x(n+2) matrix with entry j^m/m! at row j (1-based), column m."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return [
        [Fraction(j**m, math.factorial(m)) for m in range(n + 2)]
        for j in range(1, n + 3)
    ]


def _solve_rational(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    """Invert a square rational matrix by Gauss-Jordan elimination."""
    size = len(mat)
    aug = [row[:] + [Fraction(int(i == k)) for i in range(size)] for k, row in enumerate(mat)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("singular matrix in virtual-bundle solve")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = 1 / aug[col][col]
        aug[col] = [v * inv_p for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[size:] for row in aug]


@dataclass(frozen=True)
class LkSystem:
    """Integer virtual-bundle combinations isolating powers of the generator.

    ``rows[i]`` (display order: i = 0 corresponds to k = n+1, the last row
    to k = 0) gives the coefficients of line-bundle powers L^1 .. L^{n+2}
    such that the combined Chern character truncated at degree n+1 equals
    ``clearing * x^(n+1-k)`` exactly.
    """

    n: int
    clearing: int
    rows: tuple[tuple[int, ...], ...]
    inverse: tuple[tuple[Fraction, ...], ...]

    def row_for_k(self, k: int) -> tuple[int, ...]:
        if not 0 <= k <= self.n + 1:
            raise IndexError(f"k must be in 0..{self.n + 1}, got {k}")
        return self.rows[self.n + 1 - k]

    def ch_combination(self, k: int, cap: int | None = None) -> TruncPoly:
        """Chern character of the k-th combination, truncated at ``cap``."""
        cap = self.n + 1 if cap is None else cap
        acc = TruncPoly.zero(cap)
        for j, coeff in enumerate(self.row_for_k(k), start=1):
            if coeff:
                acc = acc + ch_line_power(j, cap).scale(coeff)
        return acc


def solve_lk(n: int) -> LkSystem:
    """Invert the line-power matrix and clear denominators minimally."""
    inv = _solve_rational(vandermonde(n))
    clearing = 1
    for row in inv:
        for v in row:
            clearing = clearing * v.denominator // math.gcd(clearing, v.denominator)
    rows = tuple(tuple(int(v * clearing) for v in row) for row in inv)
    return LkSystem(n=n, clearing=clearing, rows=rows, inverse=tuple(tuple(r) for r in inv))


def build_L(n: int, alpha_classes: Sequence[TruncPoly], system: LkSystem | None = None) -> TruncPoly:
    """Chern character of the combined hermitian virtual bundle.

    ``alpha_classes[k-1]`` is the formal (k,k)-class input for k = 1..n; the
    result is exact and equals
    ``(n+1)! C^{n+1} (x^{n+1}/(n+1) - sum_k alpha_k x^{n+1-k}/(n-k+1))``
    where C is the denominator-clearing constant.
    """
    if len(alpha_classes) != n:
        raise ValueError(f"expected {n} alpha classes, got {len(alpha_classes)}")
    sys_ = solve_lk(n) if system is None else system
    cap = n + 1
    for k, a in enumerate(alpha_classes, start=1):
        if a.cap != cap:
            raise DegreeCapError(f"alpha_{k} has cap {a.cap}, expected {cap}")
        if a.min_degree() < k:
            raise ValueError(f"alpha_{k} has coefficients below degree {k}")
    N = sys_.clearing
    acc = sys_.ch_combination(0, cap).scale(Fraction(math.factorial(n) * N**n))
    for k, a in enumerate(alpha_classes, start=1):
        w = Fraction(N**n * math.factorial(n + 1), n - k + 1)
        acc = acc - (a * sys_.ch_combination(k, cap)).scale(w)
    return acc


def build_L_rhs(n: int, alpha_classes: Sequence[TruncPoly], clearing: int) -> TruncPoly:
    """Closed-form right-hand side the combined character must equal."""
    cap = n + 1
    acc = TruncPoly.monomial(cap, n + 1, Fraction(1, n + 1))
    for k, a in enumerate(alpha_classes, start=1):
        acc = acc - (a * TruncPoly.monomial(cap, n + 1 - k)).scale(Fraction(1, n - k + 1))
    return acc.scale(Fraction(math.factorial(n + 1) * clearing ** (n + 1)))


def todd(c1: TruncPoly, c2: TruncPoly, cap: int) -> TruncPoly:
    """Todd factor 1 + c1/2 + (c1^2 + c2)/12 truncated at ``cap`` (<= 2)."""
    if cap > 2:
        raise DegreeCapError(f"Todd factor only supported up to degree 2, got {cap}")
    c1 = TruncPoly.from_coeffs(cap, c1.coeffs)
    c2 = TruncPoly.from_coeffs(cap, c2.coeffs)
    out = TruncPoly.one(cap) + c1.scale(Fraction(1, 2))
    out = out + (c1 * c1 + c2).scale(Fraction(1, 12))
    return out


def c_kl_constant(n: int, rank: int, degree: int, k: int, l: int) -> Fraction:
    """Topological normalizing constant of the almost-Hitchin equation.

    On the flat one-dimensional torus with unit symplectic volume the
    exponential-Todd bracket integrates to rank*k + degree and the Higgs
    bracket contributes nothing (its trace vanishes pointwise).
    """
    if n != 1:
        raise ValueError("only the flat one-dimensional torus is supported")
    return Fraction(rank * k + degree)
