"""Sparse exterior algebra over a torus grid, with optional formal generators.

Forms are dictionaries mapping sorted tuples of generator indices to complex
coefficient arrays.  Generators 0..2n-1 are the real coordinate differentials
dx_1, dy_1, ..., dx_n, dy_n; indices >= 2n are formal anticommuting
parameters (the two deformation directions of a surface of connections).
Coefficients may carry leading (r, r) endomorphism axes, in which case the
wedge multiplies matrices in order.

This module is deliberately independent of the mixed-determinant wedge in
``fields``: it provides the second assembly route for the families-index
consistency checks.
"""

from __future__ import annotations

import numpy as np

from .fields import TorusGrid, partial


def _merge(i1: tuple[int, ...], i2: tuple[int, ...]):
    """Merge two sorted index tuples; return (sign, merged) or None if repeated."""
    if set(i1) & set(i2):
        return None
    merged = tuple(sorted(i1 + i2))
    # count inversions of the concatenation i1 + i2
    sign = 1
    for a in i1:
        for b in i2:
            if a > b:
                sign = -sign
    return sign, merged


class ExtForm:
    """Inhomogeneous exterior form with array coefficients."""

    def __init__(self, grid: TorusGrid, comps: dict | None = None, matrix: bool = False):
        self.grid = grid
        self.matrix = matrix
        self.comps: dict[tuple[int, ...], np.ndarray] = {}
        if comps:
            for idx, arr in comps.items():
                self.comps[tuple(idx)] = np.asarray(arr, dtype=complex)

    def copy(self) -> "ExtForm":
        return ExtForm(self.grid, {k: v.copy() for k, v in self.comps.items()}, self.matrix)

    def __add__(self, other: "ExtForm") -> "ExtForm":
        out = self.copy()
        out.matrix = self.matrix or other.matrix
        for idx, arr in other.comps.items():
            out.comps[idx] = out.comps[idx] + arr if idx in out.comps else arr.copy()
        return out

    def __sub__(self, other: "ExtForm") -> "ExtForm":
        return self + other.scale(-1.0)

    def scale(self, c) -> "ExtForm":
        return ExtForm(self.grid, {k: c * v for k, v in self.comps.items()}, self.matrix)

    def wedge(self, other: "ExtForm") -> "ExtForm":
        out = ExtForm(self.grid, matrix=self.matrix or other.matrix)
        for i1, a in self.comps.items():
            for i2, b in other.comps.items():
                m = _merge(i1, i2)
                if m is None:
                    continue
                sign, merged = m
                if self.matrix and other.matrix:
                    prod = np.einsum("ab...,bc...->ac...", a, b)
                else:
                    prod = a * b
                if merged in out.comps:
                    out.comps[merged] = out.comps[merged] + sign * prod
                else:
                    out.comps[merged] = sign * prod
        return out

    def power(self, m: int) -> "ExtForm":
        if m == 0:
            raise ValueError("use an explicit unit form for the zeroth power")
        acc = self.copy()
        for _ in range(m - 1):
            acc = acc.wedge(self)
        return acc

    def d(self) -> "ExtForm":
        """Exterior derivative along the real coordinate generators."""
        out = ExtForm(self.grid, matrix=self.matrix)
        nax = self.grid.naxes
        for idx, arr in self.comps.items():
            for a in range(nax):
                if a in idx:
                    continue
                if arr.ndim < nax:  # constant coefficient
                    continue
                da = partial(self.grid, arr, a) if arr.ndim == nax else \
                    np.stack([[partial(self.grid, arr[i, j], a)
                               for j in range(arr.shape[1])]
                              for i in range(arr.shape[0])])
                sign = (-1) ** sum(1 for i in idx if i < a)
                key = tuple(sorted(idx + (a,)))
                if key in out.comps:
                    out.comps[key] = out.comps[key] + sign * da
                else:
                    out.comps[key] = sign * da
        return out

    def trace(self) -> "ExtForm":
        if not self.matrix:
            return self.copy()
        return ExtForm(
            self.grid,
            {k: np.einsum("aa...->...", v) for k, v in self.comps.items()},
            matrix=False,
        )

    def component(self, idx: tuple[int, ...]) -> np.ndarray:
        return self.comps.get(tuple(sorted(idx)), np.zeros((), dtype=complex))

    def integrate_top(self, extra: tuple[int, ...] = ()) -> complex:
        """Integral over the torus of the top coordinate component (wedged
        with the given formal indices)."""
        idx = tuple(range(self.grid.naxes)) + tuple(extra)
        arr = self.component(idx)
        if arr.ndim > self.grid.naxes:
            arr = np.einsum("aa...->...", arr)
        if arr.ndim == 0:
            return complex(arr)
        return complex(arr.mean())


def unit(grid: TorusGrid, matrix_rank: int = 0) -> ExtForm:
    """Degree-zero identity element."""
    if matrix_rank:
        return ExtForm(grid, {(): np.eye(matrix_rank, dtype=complex)}, matrix=True)
    return ExtForm(grid, {(): np.ones((), dtype=complex)})


def one_form(grid: TorusGrid, coeffs: dict) -> ExtForm:
    """Build a one-form from {generator index: coefficient array}."""
    return ExtForm(grid, {(a,): np.asarray(v, dtype=complex) for a, v in coeffs.items()})


def dz_form(grid: TorusGrid, j: int, coeff) -> ExtForm:
    """coeff * dz_j = coeff * (dx_j + i dy_j)."""
    c = np.asarray(coeff, dtype=complex)
    return ExtForm(grid, {(2 * j,): c, (2 * j + 1,): 1j * c})


def dzbar_form(grid: TorusGrid, j: int, coeff) -> ExtForm:
    """coeff * dzbar_j = coeff * (dx_j - i dy_j)."""
    c = np.asarray(coeff, dtype=complex)
    return ExtForm(grid, {(2 * j,): c, (2 * j + 1,): -1j * c})


def from_one_one(grid: TorusGrid, h: np.ndarray) -> ExtForm:
    """Exterior realization of  i * sum h_{j kbar} dz_j ^ dzbar_k.

    ``h`` has shape (n, n) + grid.shape (scalar-valued) or
    (n, n, r, r) + grid.shape (endomorphism-valued).
    """
    n = grid.n
    matrix = h.ndim == 2 + 2 + grid.naxes
    acc = ExtForm(grid, matrix=matrix)
    for j in range(n):
        for k in range(n):
            term = dz_form(grid, j, np.ones((), dtype=complex)).wedge(
                dzbar_form(grid, k, 1j * h[j, k]))
            term.matrix = matrix
            acc = acc + term
    return acc


def matrix_one_form_01(grid: TorusGrid, coeffs01: list[np.ndarray],
                       anti: bool = True) -> ExtForm:
    """Full 1-form from its (0,1) coefficients: sum_k (c_k dzbar_k -+ c_k^+ dz_k).

    ``anti=True`` yields the skew-Hermitian completion, ``False`` the
    Hermitian one.
    """
    matrix = coeffs01[0].ndim > grid.naxes
    sgn = -1.0 if anti else 1.0
    acc = ExtForm(grid, matrix=matrix)
    for k, c in enumerate(coeffs01):
        cd = np.conj(np.swapaxes(c, 0, 1)) if matrix else np.conj(c)
        term = dzbar_form(grid, k, c) + dz_form(grid, k, sgn * cd)
        term.matrix = matrix
        acc = acc + term
    return acc
