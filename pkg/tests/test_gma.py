"""Generalised Monge-Ampere Newton/continuation solver."""

from fractions import Fraction

import numpy as np
import pytest

from prequant_lab import gma
from prequant_lab.fields import (
    ClosedKKSpec,
    ScalarField,
    TorusGrid,
    fourier_mode,
    i_ddbar as fields_i_ddbar,
)


def _problem_n1(pts, eta_field):
    g = TorusGrid(n=1, pts=pts)
    spec = (ClosedKKSpec(1, Fraction(1), eta_field(g)),)
    return gma.GmaProblem(g, spec)


def _problem_n2(pts, amp, seed=0):
    g = TorusGrid(n=2, pts=pts)
    rng = np.random.default_rng(seed)
    f = np.zeros(g.shape)
    for _ in range(3):
        mode = tuple(int(v) for v in rng.integers(-2, 3, size=4))
        f += rng.normal() * fourier_mode(g, mode, 1.0, rng.uniform(0, 1)).values
    # normalize so the induced i ddbar perturbation has sup norm = amp
    h = fields_i_ddbar(ScalarField(g, f).mean_zero())
    eta = ScalarField(g, amp * f / max(np.max(np.abs(h.components)), 1e-12)).mean_zero()
    specs = (ClosedKKSpec(1, Fraction(0), ScalarField.zero(g)),
             ClosedKKSpec(2, Fraction(1), eta))
    return gma.GmaProblem(g, specs)


def test_compatibility_ok_and_violated():
    g = TorusGrid(n=1, pts=16)
    good = gma.GmaProblem(g, (ClosedKKSpec(1, Fraction(1), ScalarField.zero(g)),))
    assert gma.check_compatibility(good) < 1e-13
    bad = gma.GmaProblem(g, (ClosedKKSpec(1, Fraction(2), ScalarField.zero(g)),))
    with pytest.raises(gma.CompatibilityError):
        gma.newton_solve(bad)


def test_n1_analytic_recovery():
    # alpha_1 = omega + i ddbar eta makes phi = eta the exact solution.
    def eta(g):
        return fourier_mode(g, (1, 1), 0.02, 0.4)

    p = _problem_n1(64, eta)
    sol = gma.newton_solve(p)
    target = eta(p.grid).values
    assert np.max(np.abs(sol.phi.values - target)) < 1e-10
    assert sol.newton_iters <= 2


def test_n2_newton_quadratic_tail():
    p = _problem_n2(16, 0.01, seed=3)
    sol = gma.newton_solve(p)
    hist = sol.residual_history
    assert sol.newton_iters <= 8
    assert gma.residual(p, sol.phi).sup_norm() < 1e-9
    # quadratic contraction on the tail entries above round-off
    tail = [h for h in hist if 1e-13 < h < 1e-2]
    for h0, h1 in zip(tail, tail[1:]):
        assert h1 < 10.0 * h0 * h0 or h1 < 1e-12


def test_ellipticity_loss_raises():
    p = _problem_n2(16, 0.5, seed=4)
    with pytest.raises((gma.EllipticityLostError, gma.NewtonDivergenceError)):
        gma.continuation_solve(p, 5)


def test_continuation_path_monotone_start():
    p = _problem_n2(16, 0.01, seed=5)
    sols = gma.continuation_solve(p, 4)
    sups = [np.max(np.abs(s.phi.values)) for s in sols]
    assert sups[0] == 0.0
    assert all(s2 >= s1 - 1e-12 for s1, s2 in zip(sups, sups[1:]))
    assert gma.residual(p, sols[-1].phi).sup_norm() < 1e-9


def test_grid_refinement_agreement_n1():
    def eta(g):
        return fourier_mode(g, (1, 0), 0.02, 0.1)

    sols = {}
    for pts in (32, 64):
        p = _problem_n1(pts, eta)
        sols[pts] = gma.newton_solve(p).phi.values
    coarse = sols[64][::2, ::2]
    assert np.max(np.abs(sols[32] - coarse)) < 1e-10
