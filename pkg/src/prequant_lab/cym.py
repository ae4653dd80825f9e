"""Coupled Calabi--Yang--Mills system on the two-torus for a line bundle.

Unknowns are a Kahler potential phi and a bundle-metric potential u, both
mean-zero.  In the normalized curvature units of ``fields`` the two
curvature forms are

    chi_L = omega_phi = omega + i ddbar phi,
    chi_E = degE * omega + i ddbar u,

and the system reads

    E1 = 2 chi_E ^ omega_phi + lam * omega_phi^2 = 0,
    E2 = (1 + alpha lam^2 r / 2) omega_phi^2 - eta - alpha chi_E ^ chi_E = 0,

with lam the topological constant fixed by integrating the trace of the
first equation.  The module also evaluates the symplectic pairing and the
moment map of the underlying gauge action, term by term, sharing the
connection/tangent parametrization of ``moment``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, lgmres

from . import exterior
from .fdcheck import DEFAULT_STEPS, fit_slope
from .fields import (
    OneOneForm,
    ScalarField,
    TopForm,
    TorusGrid,
    flat_coefficient,
    i_ddbar,
    integrate,
    positivity_margin,
    reference_omega,
    wedge,
)
from .moment import ConnPointU1, TangentU1


class AdmissibilityError(ValueError):
    """The integral constraint on eta is violated beyond tolerance."""


class PositivityLostError(RuntimeError):
    """omega_phi stopped being positive along the iteration."""


class CymDivergenceError(RuntimeError):
    """Newton iteration failed to contract; carries the last iterate."""

    def __init__(self, msg: str, state=None, history=None):
        super().__init__(msg)
        self.state = state
        self.history = history or []


ADMISSIBLE_TOL = 1e-10


@dataclass(frozen=True)
class CymProblem:
    grid: TorusGrid
    alpha: float
    eta: TopForm
    degE: int
    r: int = 1

    def __post_init__(self):
        if self.grid.n != 2:
            raise ValueError("the coupled system is implemented for n = 2")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.r != 1:
            raise ValueError("solving supports line bundles only (r = 1)")


@dataclass(frozen=True)
class CymState:
    phi: ScalarField
    u: ScalarField

    def __post_init__(self):
        if abs(self.phi.mean()) > 1e-13 or abs(self.u.mean()) > 1e-13:
            raise ValueError("state potentials must be mean-zero")

    @staticmethod
    def zero(grid: TorusGrid) -> "CymState":
        return CymState(ScalarField.zero(grid), ScalarField.zero(grid))


@dataclass(frozen=True)
class CymNewtonConfig:
    tol: float = 1e-9
    max_iters: int = 30
    max_backtracks: int = 10
    gmres_tol: float = 1e-12


def omega_phi(p: CymProblem, s: CymState) -> OneOneForm:
    return reference_omega(p.grid) + i_ddbar(s.phi)


def curvature_E(p: CymProblem, s: CymState) -> OneOneForm:
    return reference_omega(p.grid).scale(float(p.degE)) + i_ddbar(s.u)


def compute_lambda(p: CymProblem, s: CymState | None = None) -> float:
    """lam = -int(n chi_E ^ omega_phi^{n-1}) / (r int omega_phi^n).

    Topological: independent of the state up to quadrature error.
    """
    if s is None:
        s = CymState.zero(p.grid)
    om = omega_phi(p, s)
    chi = curvature_E(p, s)
    num = integrate(wedge(chi, om).scale(2.0))
    den = p.r * integrate(wedge(om, om))
    return -num / den


def lambda_background(p: CymProblem) -> float:
    """Independent route: constant-curvature representative pairing."""
    return -p.grid.n * p.degE / p.r


def residual_cym(p: CymProblem, s: CymState) -> tuple[TopForm, TopForm]:
    lam = compute_lambda(p)
    om = omega_phi(p, s)
    chi = curvature_E(p, s)
    e1 = wedge(chi, om).scale(2.0) + wedge(om, om).scale(lam)
    c = 1.0 + 0.5 * p.alpha * lam * lam * p.r
    e2 = wedge(om, om).scale(c) - p.eta - wedge(chi, chi).scale(p.alpha)
    return e1, e2


def topological_ch2(p: CymProblem) -> float:
    """int chi_E ^ chi_E on the constant-curvature background: degE^2."""
    chi0 = reference_omega(p.grid).scale(float(p.degE))
    return integrate(wedge(chi0, chi0))


def check_eta_admissible(p: CymProblem) -> float:
    lam = compute_lambda(p)
    c = 1.0 + 0.5 * p.alpha * lam * lam * p.r
    return abs(c - integrate(p.eta) - p.alpha * topological_ch2(p))


def normalized_problem(p: CymProblem) -> CymProblem:
    """Rescale eta so the integral constraint holds exactly."""
    lam = compute_lambda(p)
    c = 1.0 + 0.5 * p.alpha * lam * lam * p.r
    target = c - p.alpha * topological_ch2(p)
    mass = integrate(p.eta)
    if mass <= 0:
        raise AdmissibilityError("eta profile must have positive mass")
    return CymProblem(p.grid, p.alpha, p.eta.scale(target / mass),
                      p.degE, p.r)


def _linearized(p: CymProblem, s: CymState, lam: float,
                dphi: ScalarField, du: ScalarField) -> tuple[TopForm, TopForm]:
    om = omega_phi(p, s)
    chi = curvature_E(p, s)
    hp = i_ddbar(dphi)
    hu = i_ddbar(du)
    de1 = wedge(hu, om).scale(2.0) + wedge(chi + om.scale(lam), hp).scale(2.0)
    c = 1.0 + 0.5 * p.alpha * lam * lam * p.r
    de2 = wedge(om, hp).scale(2.0 * c) - wedge(chi, hu).scale(2.0 * p.alpha)
    return de1, de2


def _flat_symbol(grid: TorusGrid) -> np.ndarray:
    """Fourier symbol of  psi -> density of omega ^ i ddbar psi."""
    s = flat_coefficient(grid.n)
    sym = np.zeros(grid.shape)
    for a in range(grid.naxes):
        k = grid.wavenumbers(a)
        shape = [1] * grid.naxes
        shape[a] = -1
        sym = sym + (2.0 * math.pi * k.reshape(shape)) ** 2
    sym = -s * sym
    sym.flat[0] = 1.0
    return sym


def _mean_zero(arr: np.ndarray) -> np.ndarray:
    return arr - arr.mean()


def _solve_block(p: CymProblem, s: CymState, lam: float,
                 r1: np.ndarray, r2: np.ndarray,
                 cfg: CymNewtonConfig) -> tuple[ScalarField, ScalarField]:
    """lgmres on the stacked mean-zero Jacobian, with the decoupled
    flat-Laplacian swap preconditioner (E2 drives phi, E1 drives u)."""
    grid = p.grid
    npts = int(np.prod(grid.shape))
    sym = _flat_symbol(grid)
    c = 1.0 + 0.5 * p.alpha * lam * lam * p.r

    def apply(x: np.ndarray) -> np.ndarray:
        dphi = ScalarField(grid, _mean_zero(x[:npts].reshape(grid.shape)))
        du = ScalarField(grid, _mean_zero(x[npts:].reshape(grid.shape)))
        de1, de2 = _linearized(p, s, lam, dphi, du)
        return np.concatenate([_mean_zero(de1.density).ravel(),
                               _mean_zero(de2.density).ravel()])

    def precond(x: np.ndarray) -> np.ndarray:
        y1 = x[:npts].reshape(grid.shape)
        y2 = x[npts:].reshape(grid.shape)
        dphi = np.real(np.fft.ifftn(np.fft.fftn(y2) / (2.0 * c * sym)))
        du = np.real(np.fft.ifftn(np.fft.fftn(y1) / (2.0 * sym)))
        return np.concatenate([_mean_zero(dphi).ravel(),
                               _mean_zero(du).ravel()])

    op = LinearOperator((2 * npts, 2 * npts), matvec=apply)
    pre = LinearOperator((2 * npts, 2 * npts), matvec=precond)
    b = np.concatenate([_mean_zero(r1).ravel(), _mean_zero(r2).ravel()])
    for rtol in (cfg.gmres_tol, 1e-10, 1e-8):
        x, info = lgmres(op, b, M=pre, rtol=rtol, atol=0.0, maxiter=200)
        if info == 0:
            break
    else:
        raise CymDivergenceError("inner linear solve failed", state=s)
    dphi = ScalarField(grid, _mean_zero(x[:npts].reshape(grid.shape)))
    du = ScalarField(grid, _mean_zero(x[npts:].reshape(grid.shape)))
    return dphi, du


def _residual_norm(e1: TopForm, e2: TopForm) -> float:
    return max(e1.sup_norm(), e2.sup_norm())


def coupled_newton(p: CymProblem, s0: CymState | None = None,
                   cfg: CymNewtonConfig | None = None
                   ) -> tuple[CymState, list[float]]:
    """Block Newton on (phi, u); returns the state and residual history."""
    cfg = cfg or CymNewtonConfig()
    s = s0 or CymState.zero(p.grid)
    defect = check_eta_admissible(p)
    if defect > ADMISSIBLE_TOL:
        raise AdmissibilityError(
            f"eta integral constraint violated by {defect:.3e}")
    if positivity_margin(omega_phi(p, s)) <= 0:
        raise PositivityLostError("initial omega_phi is not positive")
    lam = compute_lambda(p)
    e1, e2 = residual_cym(p, s)
    res = _residual_norm(e1, e2)
    history = [res]
    for _ in range(cfg.max_iters):
        if res < cfg.tol:
            return s, history
        dphi, du = _solve_block(p, s, lam, -e1.density, -e2.density, cfg)
        t = 1.0
        for _ in range(cfg.max_backtracks + 1):
            cand = CymState(s.phi + dphi.scale(t), s.u + du.scale(t))
            if positivity_margin(omega_phi(p, cand)) > 0:
                c1, c2 = residual_cym(p, cand)
                cres = _residual_norm(c1, c2)
                if cres < res:
                    s, e1, e2, res = cand, c1, c2, cres
                    break
            t *= 0.5
        else:
            if positivity_margin(omega_phi(p, s)) <= 0:
                raise PositivityLostError(
                    "backtracking could not keep omega_phi positive")
            raise CymDivergenceError(
                f"no residual decrease at residual {res:.3e}",
                state=s, history=history)
        history.append(res)
    if res < cfg.tol:
        return s, history
    raise CymDivergenceError(
        f"Newton did not reach tol in {cfg.max_iters} iterations "
        f"(residual {res:.3e})", state=s, history=history)


def alpha_continuation(p: CymProblem, alpha_max: float, steps: int,
                       cfg: CymNewtonConfig | None = None,
                       rescale_eta: bool = True):
    """Warm-started path in alpha from 0 to alpha_max; eta rescaled at each
    step so the integral constraint holds exactly.  With ``rescale_eta``
    off, the fixed eta violates the constraint at finite alpha whenever the
    topological terms are nonzero, and the failure is reported there."""
    cfg = cfg or CymNewtonConfig()
    path = []
    s = CymState.zero(p.grid)
    for i in range(steps + 1):
        a = alpha_max * i / steps
        pa = CymProblem(p.grid, a, p.eta, p.degE, p.r)
        if rescale_eta:
            pa = normalized_problem(pa)
        try:
            s, history = coupled_newton(pa, s, cfg)
        except (PositivityLostError, CymDivergenceError,
                AdmissibilityError) as exc:
            raise type(exc)(f"continuation failed at alpha = {a:.6g}: {exc}"
                            ) from exc
        e1, e2 = residual_cym(pa, s)
        path.append((a, s, _residual_norm(e1, e2), len(history) - 1))
    return path


# ---------------------------------------------------------------------------
# Symplectic pairing and moment map on the product of connection spaces.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CymEvalPoint:
    """A point of the product space: U(1) connection offsets for E and L,
    with a constant-curvature background of degree degE on the E factor."""

    E: ConnPointU1
    L: ConnPointU1
    degE: int = 0

    @property
    def grid(self) -> TorusGrid:
        return self.E.grid

    def theta_L(self) -> OneOneForm:
        return self.L.curvature_form()

    def theta_E(self) -> OneOneForm:
        base = reference_omega(self.grid).scale(float(self.degE - 1))
        return base + self.E.curvature_form()

    def shifted(self, t: float, b: "CymTangent") -> "CymEvalPoint":
        return CymEvalPoint(self.E.shifted(t, b.E), self.L.shifted(t, b.L),
                            self.degE)


@dataclass(frozen=True)
class CymTangent:
    E: TangentU1
    L: TangentU1


def state_point(p: CymProblem, s: CymState) -> CymEvalPoint:
    """Bridge a solver state to an evaluation point with the same
    curvatures (potential u/2 gives 2 Re u = the state potential)."""
    grid = p.grid
    eE = ConnPointU1(grid, 0.5 * s.u.values.astype(complex), (0.0,) * grid.n)
    eL = ConnPointU1(grid, 0.5 * s.phi.values.astype(complex), (0.0,) * grid.n)
    return CymEvalPoint(eE, eL, p.degE)


def _lift_matrix(grid: TorusGrid, arr: np.ndarray) -> np.ndarray:
    """Give a scalar coefficient a trivial (1, 1) endomorphism axis pair."""
    if arr.ndim > grid.naxes:
        return np.asarray(arr, dtype=complex)
    return np.asarray(arr, dtype=complex)[None, None]


def _theta_ext(grid: TorusGrid, h: np.ndarray) -> exterior.ExtForm:
    """Endomorphism-valued (1,1) curvature as an exterior form."""
    n = grid.n
    if h.ndim == 2 + grid.naxes:
        h = h[:, :, None, None]
    return exterior.from_one_one(grid, np.ascontiguousarray(h))


def omega_alpha_terms(grid: TorusGrid, theta_E: np.ndarray,
                      theta_L: OneOneForm,
                      aE01: list[np.ndarray], aL: TangentU1,
                      bE01: list[np.ndarray], bL: TangentU1,
                      alpha: float, lam: float) -> dict[str, float]:
    """The ten displayed terms of the pairing at n = 2 (the tr(theta_E^2)
    term multiplies theta_L^{n-3} and drops out identically here).

    ``theta_E`` has shape (n, n) + grid.shape for r = 1 or
    (n, n, r, r) + grid.shape for endomorphism-valued curvature."""
    thL = exterior.from_one_one(grid, theta_L.components)
    thE = _theta_ext(grid, theta_E)
    aE = exterior.matrix_one_form_01(
        grid, [_lift_matrix(grid, c) for c in aE01])
    bE = exterior.matrix_one_form_01(
        grid, [_lift_matrix(grid, c) for c in bE01])
    aLf = exterior.matrix_one_form_01(grid, aL.coeffs01())
    bLf = exterior.matrix_one_form_01(grid, bL.coeffs01())

    def itop(f: exterior.ExtForm) -> float:
        val = f.integrate_top()
        return float(np.real(val))

    terms = {
        "tr(aE bE) n thL":
            2.0 * itop(aE.wedge(bE).trace().wedge(thL)),
        "tr(thE aE) bL":
            2.0 * itop(thE.wedge(aE).trace().wedge(bLf)),
        "aL tr(thE bE)":
            2.0 * itop(aLf.wedge(thE.wedge(bE).trace())),
        "lam n thL tr(aE) bL":
            2.0 * lam * itop(thL.wedge(aE.trace()).wedge(bLf)),
        "lam n thL aL tr(bE)":
            2.0 * lam * itop(thL.wedge(aLf).wedge(bE.trace())),
        "tr(thE^2) aL bL thL^(n-3)": 0.0,
        "lam tr(thE) aL bL":
            -lam * alpha * itop(thE.trace().wedge(aLf).wedge(bLf)),
        "aL bL n thL":
            2.0 * itop(aLf.wedge(bLf).wedge(thL)),
    }
    return terms


def omega_alpha_eval(point: CymEvalPoint, a: CymTangent, b: CymTangent,
                     N: float, alpha: float, lam: float) -> float:
    """Full pairing for the line-bundle (r = 1) parametrization."""
    grid = point.grid
    terms = omega_alpha_terms(
        grid, point.theta_E().components, point.theta_L(),
        a.E.coeffs01(), a.L, b.E.coeffs01(), b.L, alpha, lam)
    e_part = (terms["tr(aE bE) n thL"] + terms["tr(thE aE) bL"]
              + terms["aL tr(thE bE)"] + terms["lam n thL tr(aE) bL"]
              + terms["lam n thL aL tr(bE)"])
    l_part = (terms["tr(thE^2) aL bL thL^(n-3)"]
              + terms["lam tr(thE) aL bL"] + terms["aL bL n thL"])
    return N * (-alpha * e_part + l_part)


def omega_alpha_eval_matrix(grid: TorusGrid, theta_E: np.ndarray,
                            theta_L: OneOneForm,
                            aE01: list[np.ndarray], aL: TangentU1,
                            bE01: list[np.ndarray], bL: TangentU1,
                            N: float, alpha: float, lam: float) -> float:
    """Rank r in {1, 2} E-factor tangents; evaluation only."""
    terms = omega_alpha_terms(grid, theta_E, theta_L, aE01, aL, bE01, bL,
                              alpha, lam)
    e_part = (terms["tr(aE bE) n thL"] + terms["tr(thE aE) bL"]
              + terms["aL tr(thE bE)"] + terms["lam n thL tr(aE) bL"]
              + terms["lam n thL aL tr(bE)"])
    l_part = (terms["tr(thE^2) aL bL thL^(n-3)"]
              + terms["lam tr(thE) aL bL"] + terms["aL bL n thL"])
    return N * (-alpha * e_part + l_part)


def mu_alpha_eval(point: CymEvalPoint, HE: ScalarField, HL: ScalarField,
                  N: float, alpha: float, lam: float, eta: TopForm) -> float:
    """Moment-map value on the gauge direction (i HE, i HL) at n = 2:

    N [ -alpha int HE (2 chi_E ^ om + lam om^2)
        + int HL (om^2 - eta - alpha chi_E^2 - lam alpha chi_E ^ om) ]
    """
    grid = point.grid
    om = point.theta_L()
    chi = point.theta_E()
    dE = wedge(chi, om).scale(2.0) + wedge(om, om).scale(lam)
    dL = (wedge(om, om) - eta - wedge(chi, chi).scale(alpha)
          - wedge(chi, om).scale(lam * alpha))
    e_val = integrate(TopForm(grid, HE.values * dE.density))
    l_val = integrate(TopForm(grid, HL.values * dL.density))
    return N * (-alpha * e_val + l_val)


def gauge_tangent(grid: TorusGrid, HE: ScalarField,
                  HL: ScalarField) -> CymTangent:
    """Vector field of the gauge direction (i HE, i HL) on both factors."""
    return CymTangent(
        TangentU1(grid, 1j * HE.values.astype(complex), (0.0,) * grid.n),
        TangentU1(grid, 1j * HL.values.astype(complex), (0.0,) * grid.n))


def fd_mu_alpha_identity(point: CymEvalPoint, HE: ScalarField,
                         HL: ScalarField, b: CymTangent, N: float,
                         alpha: float, lam: float, eta: TopForm,
                         steps=DEFAULT_STEPS) -> tuple[float, bool, list[float]]:
    """Defect order of  mu_{A+tb}(g) - mu_A(g) + t Omega_alpha(v_g, b)."""
    v_g = gauge_tangent(point.grid, HE, HL)
    mu0 = mu_alpha_eval(point, HE, HL, N, alpha, lam, eta)
    pairing = omega_alpha_eval(point, v_g, b, N, alpha, lam)
    errors = []
    for t in steps:
        mu_t = mu_alpha_eval(point.shifted(t, b), HE, HL, N, alpha, lam, eta)
        errors.append(abs(mu_t - mu0 + t * pairing))
    slope, exact = fit_slope(steps, errors)
    return slope, exact, errors
