"""Spectral field calculus on flat complex tori T^1 and T^2.

The model geometry is C^n/(Z+iZ)^n with unit period lattice, real
coordinates (x_1, y_1, ..., x_n, y_n) in [0,1) and z_j = x_j + i y_j.
Hermitian (1,1)-forms are stored through their coefficient matrices in the
convention  form = i * sum_jk h_{j kbar} dz_j ^ dzbar_k,  top forms through
their density against dx_1 dy_1 ... dx_n dy_n (total cell volume 1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

HERMITIAN_TOL = 1e-12


class GridMismatchError(ValueError):
    """Operands live on different grids."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid: ``pts`` points per real axis, 2n axes."""

    n: int
    pts: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.pts < 8 or self.pts & (self.pts - 1):
            raise ValueError(f"pts must be a power of two >= 8, got {self.pts}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.pts,) * (2 * self.n)

    @property
    def naxes(self) -> int:
        return 2 * self.n

    def axes(self) -> list[np.ndarray]:
        """Coordinate arrays broadcastable over the grid, one per real axis."""
        t = np.arange(self.pts) / self.pts
        out = []
        for a in range(self.naxes):
            shp = [1] * self.naxes
            shp[a] = self.pts
            out.append(t.reshape(shp))
        return out

    def wavenumbers(self, axis: int) -> np.ndarray:
        k = np.fft.fftfreq(self.pts, d=1.0 / self.pts)
        shp = [1] * self.naxes
        shp[axis] = self.pts
        return k.reshape(shp)

    def check(self, other: "TorusGrid"):
        if self != other:
            raise GridMismatchError(f"grid mismatch: {self} vs {other}")


def flat_coefficient(n: int) -> float:
    """Diagonal entry s of the reference form, from unit symplectic volume.

    n=1: top density of s*I is 2s = 1.  n=2: density is 8 s^2 = 1.
    """
    return 0.5 if n == 1 else 0.5 / np.sqrt(2.0)


def partial(grid: TorusGrid, values: np.ndarray, axis: int) -> np.ndarray:
    """Spectral derivative along one real axis."""
    hat = np.fft.fft(values, axis=axis)
    hat *= 2j * np.pi * grid.wavenumbers(axis)
    return np.fft.ifft(hat, axis=axis)


def d_z(grid: TorusGrid, values: np.ndarray, j: int) -> np.ndarray:
    """Holomorphic derivative d/dz_j = (d_x - i d_y)/2."""
    return 0.5 * (partial(grid, values, 2 * j) - 1j * partial(grid, values, 2 * j + 1))


def d_zbar(grid: TorusGrid, values: np.ndarray, j: int) -> np.ndarray:
    """Antiholomorphic derivative d/dzbar_j = (d_x + i d_y)/2."""
    return 0.5 * (partial(grid, values, 2 * j) + 1j * partial(grid, values, 2 * j + 1))


@dataclass(frozen=True)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray  # real, shape grid.shape

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatchError("scalar field shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field has non-finite values")

    @staticmethod
    def zero(grid: TorusGrid) -> "ScalarField":
        return ScalarField(grid, np.zeros(grid.shape))

    def mean(self) -> float:
        return float(self.values.mean())

    def mean_zero(self) -> "ScalarField":
        return ScalarField(self.grid, self.values - self.values.mean())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self.grid.check(other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self.grid.check(other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def scale(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, c * self.values)


@dataclass(frozen=True)
class OneOneForm:
    """Hermitian coefficient matrix field h_{j kbar}, shape (n, n) + grid."""

    grid: TorusGrid
    components: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.components.shape != (n, n) + self.grid.shape:
            raise GridMismatchError("(1,1)-form component shape does not match grid")

    def hermitian_defect(self) -> float:
        h = self.components
        sw = np.conj(np.swapaxes(h, 0, 1))
        return float(np.max(np.abs(h - sw)))

    def __add__(self, other: "OneOneForm") -> "OneOneForm":
        self.grid.check(other.grid)
        return OneOneForm(self.grid, self.components + other.components)

    def __sub__(self, other: "OneOneForm") -> "OneOneForm":
        self.grid.check(other.grid)
        return OneOneForm(self.grid, self.components - other.components)

    def scale(self, c: float) -> "OneOneForm":
        return OneOneForm(self.grid, c * self.components)


@dataclass(frozen=True)
class TopForm:
    grid: TorusGrid
    density: np.ndarray  # real, shape grid.shape

    def __post_init__(self):
        if self.density.shape != self.grid.shape:
            raise GridMismatchError("top-form density shape does not match grid")

    def __add__(self, other: "TopForm") -> "TopForm":
        self.grid.check(other.grid)
        return TopForm(self.grid, self.density + other.density)

    def __sub__(self, other: "TopForm") -> "TopForm":
        self.grid.check(other.grid)
        return TopForm(self.grid, self.density - other.density)

    def scale(self, c: float) -> "TopForm":
        return TopForm(self.grid, c * self.density)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.density)))


@dataclass(frozen=True)
class ClosedKKSpec:
    """Closed (k,k)-form  c * omega^k + (i ddbar eta) ^ omega^(k-1)."""

    k: int
    c: Fraction
    eta: ScalarField


def reference_omega(grid: TorusGrid) -> OneOneForm:
    """Flat Kahler form s * delta_{jk}, normalized to unit top volume."""
    s = flat_coefficient(grid.n)
    n = grid.n
    comp = np.zeros((n, n) + grid.shape, dtype=complex)
    for j in range(n):
        comp[j, j] = s
    return OneOneForm(grid, comp)


def i_ddbar(phi: ScalarField) -> OneOneForm:
    """Hermitian matrix of mixed second derivatives d^2 phi / dz_j dzbar_k."""
    grid = phi.grid
    n = grid.n
    comp = np.empty((n, n) + grid.shape, dtype=complex)
    vals = phi.values.astype(complex)
    dbar = [d_zbar(grid, vals, k) for k in range(n)]
    for j in range(n):
        for k in range(n):
            comp[j, k] = d_z(grid, dbar[k], j)
    # enforce exact Hermitian symmetry against FFT roundoff
    comp = 0.5 * (comp + np.conj(np.swapaxes(comp, 0, 1)))
    return OneOneForm(grid, comp)


def top_form(a: OneOneForm) -> TopForm:
    """A (1,1)-form on T^1 is already top:  i h dz ^ dzbar = 2h dx dy."""
    if a.grid.n != 1:
        raise ValueError("top_form applies to one-dimensional tori only")
    return TopForm(a.grid, 2.0 * np.real(a.components[0, 0]))


def wedge(a: OneOneForm, b: OneOneForm) -> TopForm:
    """Wedge of two (1,1)-forms on T^2, as a top-form density.

    Mixed-determinant rule times the constant fixed by
    wedge(omega, omega) = omega^n.
    """
    a.grid.check(b.grid)
    if a.grid.n != 2:
        raise ValueError("wedge of two (1,1)-forms is top only on T^2")
    ha, hb = a.components, b.components
    mix = (
        ha[0, 0] * hb[1, 1]
        + ha[1, 1] * hb[0, 0]
        - ha[0, 1] * hb[1, 0]
        - ha[1, 0] * hb[0, 1]
    )
    return TopForm(a.grid, 4.0 * np.real(mix))


def omega_power_top(a: OneOneForm) -> TopForm:
    """a^n as a top form (n=1: conversion; n=2: self-wedge)."""
    return top_form(a) if a.grid.n == 1 else wedge(a, a)


def integrate(t: TopForm) -> float:
    """Equal-weight periodic quadrature (exact for band-limited densities)."""
    return float(t.density.mean())


def build_alpha(spec: ClosedKKSpec, grid: TorusGrid):
    """Realize the closed (k,k)-form of a spec on the given grid.

    Returns a OneOneForm for k < n and a TopForm for k = n.
    """
    n = grid.n
    if not 1 <= spec.k <= n:
        raise ValueError(f"degree k must be in 1..{n}, got {spec.k}")
    grid.check(spec.eta.grid)
    omega = reference_omega(grid)
    exact = i_ddbar(spec.eta)
    c = float(spec.c)
    if spec.k < n:  # only k=1 at n=2
        return omega.scale(c) + exact
    if n == 1:
        return top_form(omega.scale(c) + exact)
    # k = n = 2: c * omega^2 + (i ddbar eta) ^ omega
    return wedge(omega, omega).scale(c) + wedge(exact, omega)


def positivity_margin(a: OneOneForm) -> float:
    """Minimum over grid points of the smallest Hermitian eigenvalue."""
    h = a.components
    if a.grid.n == 1:
        return float(np.min(np.real(h[0, 0])))
    tr = np.real(h[0, 0] + h[1, 1])
    disc = np.sqrt(np.real(h[0, 0] - h[1, 1]) ** 2 + 4.0 * np.abs(h[0, 1]) ** 2)
    return float(np.min(0.5 * (tr - disc)))


def fourier_mode(grid: TorusGrid, mode: tuple[int, ...], amplitude: float = 1.0,
                 phase: float = 0.0) -> ScalarField:
    """Real cosine mode  amplitude * cos(2 pi mode.x + phase)."""
    if len(mode) != grid.naxes:
        raise ValueError(f"mode needs {grid.naxes} integers")
    arg = np.zeros(grid.shape)
    for m, ax in zip(mode, grid.axes()):
        arg = arg + 2.0 * np.pi * m * ax
    return ScalarField(grid, amplitude * np.cos(arg + phase))


def to_bytes(field: ScalarField) -> bytes:
    """Flat binary snapshot: header (n, pts) then row-major doubles."""
    head = struct.pack("<ii", field.grid.n, field.grid.pts)
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def from_bytes(raw: bytes) -> ScalarField:
    n, pts = struct.unpack("<ii", raw[:8])
    grid = TorusGrid(n, pts)
    vals = np.frombuffer(raw[8:], dtype="<f8").reshape(grid.shape).copy()
    return ScalarField(grid, vals)


def to_csv_rows(field: ScalarField):
    """(index..., value) rows for plotting exports."""
    for idx in np.ndindex(field.grid.shape):
        yield (*idx, field.values[idx])
