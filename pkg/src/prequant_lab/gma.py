"""Newton/continuation solver for the generalised Monge-Ampere equation
omega_phi^n = sum_k alpha_k ^ omega_phi^(n-k) on T^1 and T^2.

The alpha_k are closed (k,k)-forms of the family c_k * omega^k + exact part.
The n=1 equation is linear in phi; the n=2 equation is genuinely nonlinear
and is solved by damped Newton with spectrally preconditioned CG on the
mean-zero subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .fields import (
    ClosedKKSpec,
    OneOneForm,
    ScalarField,
    TopForm,
    TorusGrid,
    build_alpha,
    i_ddbar,
    integrate,
    omega_power_top,
    positivity_margin,
    reference_omega,
    top_form,
    wedge,
)


class CompatibilityError(ValueError):
    """Integral hypothesis int omega^n = sum int alpha_k ^ omega^(n-k) fails."""


class EllipticityLostError(RuntimeError):
    """The coefficient form lost pointwise positivity during iteration."""


class NewtonDivergenceError(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""


@dataclass(frozen=True)
class GmaProblem:
    grid: TorusGrid
    specs: tuple[ClosedKKSpec, ...]

    def __post_init__(self):
        if len(self.specs) != self.grid.n:
            raise ValueError(
                f"need {self.grid.n} closed-form specs, got {len(self.specs)}")
        for k, s in enumerate(self.specs, start=1):
            if s.k != k:
                raise ValueError(f"spec at slot {k} has degree {s.k}")

    def alphas(self):
        """Realized forms, ordered k = 1..n."""
        return [build_alpha(s, self.grid) for s in self.specs]


@dataclass(frozen=True)
class GmaSolution:
    phi: ScalarField
    residual_norm: float
    ellipticity_margin: float
    newton_iters: int
    residual_history: tuple[float, ...] = field(default=())


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-9
    max_iters: int = 25
    max_backtracks: int = 10
    cg_tol: float = 1e-12


def check_compatibility(p: GmaProblem) -> float:
    """|int omega^n - sum_k int alpha_k ^ omega^(n-k)| by direct quadrature."""
    n = p.grid.n
    omega = reference_omega(p.grid)
    total = 0.0
    for k, a in enumerate(p.alphas(), start=1):
        if k == n:
            total += integrate(a)
        else:  # only k=1 at n=2
            total += integrate(wedge(a, omega))
    return abs(1.0 - total)


def residual(p: GmaProblem, phi: ScalarField) -> TopForm:
    """omega_phi^n - sum_k alpha_k ^ omega_phi^(n-k) as a top density."""
    p.grid.check(phi.grid)
    omega_phi = reference_omega(p.grid) + i_ddbar(phi)
    alphas = p.alphas()
    if p.grid.n == 1:
        return top_form(omega_phi) - alphas[0]
    return wedge(omega_phi, omega_phi) - wedge(alphas[0], omega_phi) - alphas[1]


def ellipticity_form(p: GmaProblem, phi: ScalarField):
    """n*omega_phi^(n-1) - sum (n-k) alpha_k ^ omega_phi^(n-k-1).

    Scalar 1.0 for n=1 (the sum degenerates), OneOneForm 2*omega_phi - alpha_1
    for n=2.
    """
    if p.grid.n == 1:
        return 1.0
    omega_phi = reference_omega(p.grid) + i_ddbar(phi)
    return omega_phi.scale(2.0) - p.alphas()[0]


def ellipticity_margin(p: GmaProblem, phi: ScalarField) -> float:
    coeff = ellipticity_form(p, phi)
    if p.grid.n == 1:
        return float(coeff)
    return positivity_margin(coeff)


def linearized_apply(p: GmaProblem, phi: ScalarField, psi: ScalarField) -> TopForm:
    """First variation of the residual: ellipticity_form ^ i ddbar psi."""
    hess = i_ddbar(psi)
    if p.grid.n == 1:
        return top_form(hess)
    return wedge(ellipticity_form(p, phi), hess)


def _flat_symbol(grid: TorusGrid, coeff_scale: float) -> np.ndarray:
    """Fourier symbol of the flat preconditioner coeff_scale * Laplacian / 2."""
    lap = np.zeros(grid.shape)
    for a in range(grid.naxes):
        lap = lap - (2.0 * np.pi * grid.wavenumbers(a)) ** 2
    sym = 0.5 * coeff_scale * lap
    sym[(0,) * grid.naxes] = 1.0  # constants handled by projection
    return sym


def _solve_linear(p: GmaProblem, phi: ScalarField, rhs: np.ndarray,
                  cfg: NewtonConfig) -> np.ndarray:
    """CG solve of linearized_apply(psi) = rhs on mean-zero fields."""
    grid = p.grid
    shape = grid.shape
    size = rhs.size

    # the operator is negative definite on mean-zero fields (Laplacian-like);
    # CG is fed its negation
    def apply_op(v: np.ndarray) -> np.ndarray:
        psi = ScalarField(grid, v.reshape(shape))
        out = linearized_apply(p, phi, psi).density
        return -(out - out.mean()).ravel()

    # flat-coefficient scale: value of the ellipticity form against i ddbar
    # at the reference point, used only as a preconditioner
    if grid.n == 1:
        scale = 1.0
    else:
        coeff = ellipticity_form(p, phi)
        scale = 2.0 * float(np.real(coeff.components[0, 0] +
                                    coeff.components[1, 1]).mean())
    sym = _flat_symbol(grid, scale)

    def apply_pre(v: np.ndarray) -> np.ndarray:
        hat = np.fft.fftn(v.reshape(shape)) / (-sym)
        hat[(0,) * grid.naxes] = 0.0
        return np.real(np.fft.ifftn(hat)).ravel()

    op = LinearOperator((size, size), matvec=apply_op)
    pre = LinearOperator((size, size), matvec=apply_pre)
    b = -(rhs - rhs.mean())
    # aliasing puts a noise floor under the effective symmetry of the
    # operator, so relax the inner tolerance before giving up
    for rtol in (cfg.cg_tol, 1e-10, 1e-8):
        sol, info = cg(op, b.ravel(), rtol=rtol, atol=0.0, M=pre, maxiter=500)
        if info == 0:
            break
    else:
        raise NewtonDivergenceError(f"inner CG did not converge (info={info})")
    out = sol.reshape(shape)
    return out - out.mean()


def newton_solve(p: GmaProblem, cfg: NewtonConfig | None = None,
                 phi0: ScalarField | None = None) -> GmaSolution:
    """Damped Newton iteration from phi0 (default 0)."""
    cfg = cfg or NewtonConfig()
    defect = check_compatibility(p)
    if defect > 1e-10:
        raise CompatibilityError(f"compatibility defect {defect:.3e} > 1e-10")
    phi = (phi0 or ScalarField.zero(p.grid)).mean_zero()

    history = []
    res = residual(p, phi)
    rnorm = res.sup_norm()
    history.append(rnorm)
    iters = 0
    while rnorm >= cfg.tol:
        if iters >= cfg.max_iters:
            raise NewtonDivergenceError(
                f"residual {rnorm:.3e} after {iters} Newton steps")
        margin = ellipticity_margin(p, phi)
        if margin <= 0.0:
            raise EllipticityLostError(
                f"ellipticity margin {margin:.3e} at iterate {iters}")
        step = _solve_linear(p, phi, -res.density, cfg)
        lam = 1.0
        for _ in range(cfg.max_backtracks + 1):
            trial = ScalarField(p.grid, phi.values + lam * step)
            trial_res = residual(p, trial)
            if (trial_res.sup_norm() < rnorm
                    and ellipticity_margin(p, trial) > 0.0):
                break
            lam *= 0.5
        else:
            raise NewtonDivergenceError(
                f"line search stalled at iterate {iters} (residual {rnorm:.3e})")
        phi, res, rnorm = trial, trial_res, trial_res.sup_norm()
        history.append(rnorm)
        iters += 1

    margin = ellipticity_margin(p, phi)
    if margin <= 0.0:
        raise EllipticityLostError(f"final ellipticity margin {margin:.3e}")
    return GmaSolution(phi.mean_zero(), rnorm, margin, iters, tuple(history))


def _scaled_problem(p: GmaProblem, t: float) -> GmaProblem:
    """Interpolate from the trivially compatible constant problem (t=0)
    to the target (t=1): exact parts scaled by t, coefficients blended
    toward c_k = delta_{k,n}."""
    n = p.grid.n
    specs = []
    for k, s in enumerate(p.specs, start=1):
        c_triv = 1 if k == n else 0
        c_t = (1.0 - t) * c_triv + t * float(s.c)
        # keep exact rational when t is 0 or 1
        c_val = s.c if t == 1.0 else (Fraction(c_triv) if t == 0.0
                                      else Fraction(c_t).limit_denominator(10**12))
        specs.append(ClosedKKSpec(k, c_val, s.eta.scale(t)))
    return GmaProblem(p.grid, tuple(specs))


def continuation_solve(p: GmaProblem, t_steps: int,
                       cfg: NewtonConfig | None = None) -> list[GmaSolution]:
    """Warm-started path in t from 0 to 1 in t_steps increments."""
    if t_steps < 1:
        raise ValueError("t_steps must be >= 1")
    cfg = cfg or NewtonConfig()
    out = []
    phi = ScalarField.zero(p.grid)
    for m in range(t_steps + 1):
        t = m / t_steps
        pt = _scaled_problem(p, t)
        try:
            sol = newton_solve(pt, cfg, phi0=phi)
        except (EllipticityLostError, NewtonDivergenceError) as exc:
            raise type(exc)(f"continuation failed at t={t:.4f}: {exc}") from exc
        out.append(sol)
        phi = sol.phi
    return out
