"""Exact rational Chern-Weil calculus checks."""

from fractions import Fraction

import numpy as np
import pytest

from prequant_lab import chern


def test_truncpoly_arithmetic():
    x = chern.TruncPoly.monomial(3, 1)
    p = (x * x).scale(Fraction(1, 2)) + chern.TruncPoly.one(3)
    assert p.coeffs[2] == Fraction(1, 2)
    assert p.coeffs[0] == 1
    # cap truncation: x^3 * x stays within cap
    q = chern.TruncPoly.monomial(3, 3) * x
    assert all(c == 0 for c in q.coeffs)


def test_degree_cap_mismatch():
    x3 = chern.TruncPoly.monomial(3, 1)
    x4 = chern.TruncPoly.monomial(4, 1)
    with pytest.raises(ValueError):
        _ = x3 + x4


def test_lk_rows_n1():
    sys1 = chern.solve_lk(1)
    assert sys1.clearing == 2
    assert sys1.rows == ((6, -6, 2), (-5, 8, -3), (2, -4, 2))


def test_lk_identity_exact():
    for n in range(1, 5):
        sysn = chern.solve_lk(n)
        cap = n + 1
        for k in range(n + 1):
            combo = sysn.ch_combination(k, cap)
            want = chern.TruncPoly.monomial(cap, n + 1 - k, sysn.clearing)
            assert combo == want, (n, k)


def test_build_l_quadratic_example():
    # n = 1 with alpha_1 = x: the assembled class is -N^2 x^2 = -4 x^2.
    x = chern.TruncPoly.monomial(2, 1)
    out = chern.build_L(1, [x])
    assert out == chern.TruncPoly.monomial(2, 2, -4)


def test_build_l_matches_rhs_random():
    rng = np.random.default_rng(20240817)
    for n in range(1, 5):
        sysn = chern.solve_lk(n)
        cap = n + 1
        for _ in range(20):
            alphas = [
                chern.TruncPoly.monomial(
                    cap, k, Fraction(int(rng.integers(-9, 10)),
                                     int(rng.integers(1, 10))))
                for k in range(1, n + 1)
            ]
            lhs = chern.build_L(n, alphas, sysn)
            rhs = chern.build_L_rhs(n, alphas, sysn.clearing)
            assert lhs == rhs


def test_ckl_affine_in_k():
    for rank in (1, 2):
        for deg in (-1, 0, 3):
            vals = [chern.c_kl_constant(1, rank, deg, k, 0)
                    for k in range(2, 7)]
            diffs = {vals[i + 1] - vals[i] for i in range(len(vals) - 1)}
            assert diffs == {Fraction(rank)}
            assert vals[0] == rank * 2 + deg
