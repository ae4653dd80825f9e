"""Finite-dimensional slice of the space of line-bundle connections on the
torus: symplectic form, moment map, gauge actions, and the families-index
density cross-check.

Connections are parametrized by a complex potential u (offset a^{0,1} =
dbar u) plus harmonic (0,1) coefficients; the curvature form is then
omega_A = omega + i ddbar(2 Re u).  Tangent vectors carry the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import exterior
from .chern import solve_lk
from .fdcheck import DEFAULT_STEPS, fit_slope
from .fields import (
    OneOneForm,
    ScalarField,
    TopForm,
    TorusGrid,
    d_zbar,
    i_ddbar,
    integrate,
    reference_omega,
    top_form,
    wedge,
)
from .gma import GmaProblem


@dataclass(frozen=True)
class ConnPointU1:
    """Connection offset a^{0,1} = dbar u + harmonic part."""

    grid: TorusGrid
    u: np.ndarray  # complex potential, shape grid.shape
    harm: tuple[complex, ...]

    def __post_init__(self):
        if self.u.shape != self.grid.shape:
            raise ValueError("potential shape does not match grid")
        if len(self.harm) != self.grid.n:
            raise ValueError(f"need {self.grid.n} harmonic coefficients")

    @staticmethod
    def base(grid: TorusGrid) -> "ConnPointU1":
        return ConnPointU1(grid, np.zeros(grid.shape, dtype=complex),
                           (0.0,) * grid.n)

    def coeffs01(self) -> list[np.ndarray]:
        """The (0,1) coefficients of the offset, one array per dzbar_k."""
        return [d_zbar(self.grid, self.u, k) + self.harm[k]
                for k in range(self.grid.n)]

    def curvature_form(self) -> OneOneForm:
        """omega_A = omega + i ddbar (2 Re u): the harmonic part is flat."""
        pot = ScalarField(self.grid, 2.0 * np.real(self.u))
        return reference_omega(self.grid) + i_ddbar(pot)

    def shifted(self, t: float, b: "TangentU1") -> "ConnPointU1":
        return ConnPointU1(
            self.grid, self.u + t * b.v,
            tuple(h + t * hb for h, hb in zip(self.harm, b.harm)))


@dataclass(frozen=True)
class TangentU1:
    """Imaginary-valued 1-form a with a^{0,1} = dbar v + harmonic part."""

    grid: TorusGrid
    v: np.ndarray
    harm: tuple[complex, ...]

    def __post_init__(self):
        if self.v.shape != self.grid.shape:
            raise ValueError("tangent potential shape does not match grid")
        if len(self.harm) != self.grid.n:
            raise ValueError(f"need {self.grid.n} harmonic coefficients")

    def coeffs01(self) -> list[np.ndarray]:
        return [d_zbar(self.grid, self.v, k) + self.harm[k]
                for k in range(self.grid.n)]

    def scale(self, c: float) -> "TangentU1":
        return TangentU1(self.grid, c * self.v, tuple(c * h for h in self.harm))


@dataclass(frozen=True)
class GaugeDirU1:
    """Direction i*H in the unitary gauge algebra."""

    H: ScalarField

    def induced_tangent(self) -> TangentU1:
        """Vector field of the gauge action: a^{0,1} = dbar(i H)."""
        grid = self.H.grid
        return TangentU1(grid, 1j * self.H.values.astype(complex),
                         (0.0,) * grid.n)


def _pair_one_one(grid: TorusGrid, a01, b01) -> OneOneForm:
    """(a ^ b)^{1,1} for imaginary 1-forms given by (0,1) coefficients.

    Coefficient matrix m_{j kbar} = i (conj(A_j) B_k - A_k conj(B_j)),
    Hermitian pointwise.
    """
    n = grid.n
    comp = np.empty((n, n) + grid.shape, dtype=complex)
    for j in range(n):
        for k in range(n):
            comp[j, k] = 1j * (np.conj(a01[j]) * b01[k] - a01[k] * np.conj(b01[j]))
    return OneOneForm(grid, comp)


def _coefficient_form(p: GmaProblem, omega_a: OneOneForm):
    """n omega_A^(n-1) - sum (n-k) alpha_k omega_A^(n-k-1); scalar 1 at n=1."""
    if p.grid.n == 1:
        return 1.0
    return omega_a.scale(2.0) - p.alphas()[0]


def omega_eval(p: GmaProblem, A: ConnPointU1, a: TangentU1, b: TangentU1,
               W: float = 1.0) -> float:
    """Symplectic pairing W * int a ^ b ^ coefficient-form."""
    grid = p.grid
    grid.check(A.grid)
    m = _pair_one_one(grid, a.coeffs01(), b.coeffs01())
    if grid.n == 1:
        return W * integrate(top_form(m))
    return W * integrate(wedge(m, _coefficient_form(p, A.curvature_form())))


def moment_eval(p: GmaProblem, A: ConnPointU1, H: GaugeDirU1,
                W: float = 1.0) -> float:
    """W * int H (omega_A^n - sum alpha_k omega_A^(n-k))."""
    grid = p.grid
    grid.check(A.grid)
    omega_a = A.curvature_form()
    alphas = p.alphas()
    if grid.n == 1:
        dens = top_form(omega_a) - alphas[0]
    else:
        dens = wedge(omega_a, omega_a) - wedge(alphas[0], omega_a) - alphas[1]
    return W * integrate(TopForm(grid, H.H.values * dens.density))


def fd_moment_identity(p: GmaProblem, A: ConnPointU1, H: GaugeDirU1,
                       b: TangentU1, W: float = 1.0,
                       steps=DEFAULT_STEPS) -> tuple[float, bool, list[float]]:
    """Defect order of  mu_{A+tb}(iH) - mu_A(iH) + t Omega_A(v_H, b).

    Returns (fitted slope, exact flag, errors); the identity is affine at
    n=1, so the defect vanishes to round-off there.
    """
    v_h = H.induced_tangent()
    mu0 = moment_eval(p, A, H, W)
    pairing = omega_eval(p, A, v_h, b, W)
    errors = []
    for t in steps:
        mu_t = moment_eval(p, A.shifted(t, b), H, W)
        errors.append(abs(mu_t - mu0 + t * pairing))
    slope, exact = fit_slope(steps, errors)
    return slope, exact, errors


def complex_gauge_act(A: ConnPointU1, phi: ScalarField) -> ConnPointU1:
    """Complex gauge action with phi = log|g|^2: curvature changes by
    i ddbar phi."""
    A.grid.check(phi.grid)
    return ConnPointU1(A.grid, A.u + 0.5 * phi.values.astype(complex), A.harm)


def closedness_check(p: GmaProblem, A: ConnPointU1, a: TangentU1,
                     b: TangentU1, c: TangentU1, step: float = 1e-3,
                     W: float = 1.0) -> float:
    """Affine exterior derivative d Omega (a, b, c) by central differences."""

    def deriv(x: TangentU1, y: TangentU1, z: TangentU1) -> float:
        plus = omega_eval(p, A.shifted(step, x), y, z, W)
        minus = omega_eval(p, A.shifted(-step, x), y, z, W)
        return (plus - minus) / (2.0 * step)

    return deriv(a, b, c) - deriv(b, a, c) + deriv(c, a, b)


def _alpha_ext(p: GmaProblem) -> list[exterior.ExtForm]:
    grid = p.grid
    out = []
    for k, alpha in enumerate(p.alphas(), start=1):
        if k < grid.n:
            out.append(exterior.from_one_one(grid, alpha.components))
        elif grid.n == 1:
            # a (1,1)-form on T^1 held as a top density
            out.append(exterior.ExtForm(
                grid, {(0, 1): alpha.density.astype(complex)}))
        else:
            out.append(exterior.ExtForm(
                grid, {(0, 1, 2, 3): alpha.density.astype(complex)}))
    return out


def index_density_omega(p: GmaProblem, A: ConnPointU1, a: TangentU1,
                        b: TangentU1) -> float:
    """Families-index density pairing of (a, b).

    Assembles F = omega_A + a e1 + b e2 over a two-parameter surface of
    connections (e1, e2 formal anticommuting generators), expands the Chern
    character of the weighted virtual-bundle combination, and integrates the
    coefficient of (volume ^ e1 ^ e2).  Proportional to omega_eval with one
    global constant (flat Todd class).
    """
    grid = p.grid
    n = grid.n
    sysn = solve_lk(n)
    e1, e2 = 2 * n, 2 * n + 1

    f_curv = exterior.from_one_one(grid, A.curvature_form().components)
    a_full = exterior.matrix_one_form_01(grid, a.coeffs01())
    b_full = exterior.matrix_one_form_01(grid, b.coeffs01())
    unit_e1 = exterior.one_form(grid, {e1: np.ones((), dtype=complex)})
    unit_e2 = exterior.one_form(grid, {e2: np.ones((), dtype=complex)})
    F = f_curv + a_full.wedge(unit_e1) + b_full.wedge(unit_e2)

    # e^{jF} truncated: F^m = 0 beyond total degree 2n + 2
    powers = [exterior.unit(grid)]
    for m in range(1, n + 2):
        powers.append(powers[-1].wedge(F))
    fact = 1.0
    exps = []
    for j in range(1, n + 3):
        acc = exterior.ExtForm(grid)
        fact_m = 1.0
        for m in range(n + 2):
            if m:
                fact_m *= m
            acc = acc + powers[m].scale(float(j) ** m / fact_m)
        exps.append(acc)

    N = sysn.clearing
    alphas = _alpha_ext(p)

    def ch_of_lk(k: int) -> exterior.ExtForm:
        row = sysn.row_for_k(k)
        acc = exterior.ExtForm(grid)
        for j, r in enumerate(row, start=1):
            if r:
                acc = acc + exps[j - 1].scale(float(r))
        return acc

    # ch(L-combination): n! N^n ch(Lk_0) - sum_k weight_k alpha_k ^ ch(Lk_k)
    total = ch_of_lk(0).scale(math.factorial(n) * N ** n)
    for k in range(1, n + 1):
        w_k = N ** n * math.factorial(n + 1) / (n - k + 1)
        total = total - alphas[k - 1].wedge(ch_of_lk(k)).scale(w_k)

    return float(np.real(total.integrate_top(extra=(e1, e2))))


INDEX_RATIO_TOL = 1e-9


def index_ratio(p: GmaProblem, A: ConnPointU1, a: TangentU1,
                b: TangentU1, W: float = 1.0) -> float:
    """Measured constant index_density_omega / omega_eval."""
    om = omega_eval(p, A, a, b, W)
    if abs(om) < 1e-14:
        raise ValueError("pairing too small to measure the ratio")
    return index_density_omega(p, A, a, b) / om
