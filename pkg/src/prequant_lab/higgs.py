"""Rank-2 connection/Higgs-field configuration space on the one-dimensional
torus: symplectic pairings, moment maps, the normalized curvature residual,
metric factors, and the linearized self-adjoint operator at the flat base.

Conventions.  The connection offset is a^{0,1} = alpha dzbar with the
skew-Hermitian completion alpha dzbar - alpha^+ dz; the Higgs field is
Phi = phi dz.  The normalized curvature is

    H_A = (d/2) s I + (1/(2 pi)) (d_z alpha + d_zbar alpha^+
                                   + alpha alpha^+ - alpha^+ alpha),

a Hermitian (1,1)-coefficient with s the flat normalization constant.  The
unitary gauge algebra acts by v_g = (-(dbar_A g), [g, Phi]); the sign is the
one that makes the two pairings below satisfy the moment-map identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh

from .chern import c_kl_constant
from .fdcheck import DEFAULT_STEPS, fit_slope
from .fields import TorusGrid, d_z, d_zbar, flat_coefficient

SIGMA = np.array([
    [[1.0, 0.0], [0.0, 1.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, -1.0j], [1.0j, 0.0]],
    [[1.0, 0.0], [0.0, -1.0]],
], dtype=complex)


def _check_rank2(grid: TorusGrid, arr: np.ndarray, what: str):
    if grid.n != 1:
        raise ValueError("rank-2 sector is implemented on T^1 only")
    if arr.shape != (2, 2) + grid.shape:
        raise ValueError(f"{what} must have shape (2, 2) + grid.shape")


def _dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, 0, 1))


def _mat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ab...,bc...->ac...", a, b)


def _tr(m: np.ndarray) -> np.ndarray:
    return m[0, 0] + m[1, 1]


def _int_tr(grid: TorusGrid, m: np.ndarray) -> complex:
    return complex(_tr(m).mean())


@dataclass(frozen=True)
class RankTwoConn:
    """Offset alpha from the flat base plus a degree-d background."""

    grid: TorusGrid
    a: np.ndarray
    deg: int

    def __post_init__(self):
        _check_rank2(self.grid, self.a, "connection offset")

    @staticmethod
    def flat(grid: TorusGrid, deg: int = 0) -> "RankTwoConn":
        return RankTwoConn(grid, np.zeros((2, 2) + grid.shape, dtype=complex), deg)

    def chern_matrix(self) -> np.ndarray:
        """H_A: Hermitian coefficient of the first Chern form of A."""
        g = self.grid
        al = self.a
        curl = np.empty_like(al)
        for i in range(2):
            for j in range(2):
                curl[i, j] = d_z(g, al[i, j], 0)
        curl = curl + _dag(curl) + _mat(al, _dag(al)) - _mat(_dag(al), al)
        s = flat_coefficient(1)
        base = 0.5 * self.deg * s * np.broadcast_to(
            np.eye(2, dtype=complex)[..., None, None], al.shape)
        return base + curl / (2.0 * np.pi)

    def shifted(self, t: float, da: np.ndarray) -> "RankTwoConn":
        return RankTwoConn(self.grid, self.a + t * da, self.deg)


@dataclass(frozen=True)
class HiggsPoint:
    """Coefficient of dz in the Higgs field."""

    grid: TorusGrid
    phi: np.ndarray

    def __post_init__(self):
        _check_rank2(self.grid, self.phi, "Higgs field")

    @staticmethod
    def zero(grid: TorusGrid) -> "HiggsPoint":
        return HiggsPoint(grid, np.zeros((2, 2) + grid.shape, dtype=complex))

    @staticmethod
    def constant(grid: TorusGrid, m: np.ndarray) -> "HiggsPoint":
        vals = np.broadcast_to(
            np.asarray(m, dtype=complex)[..., None, None],
            (2, 2) + grid.shape).copy()
        return HiggsPoint(grid, vals)

    def shifted(self, t: float, dphi: np.ndarray) -> "HiggsPoint":
        return HiggsPoint(self.grid, self.phi + t * dphi)


@dataclass(frozen=True)
class HermEndoField:
    grid: TorusGrid
    h: np.ndarray

    def __post_init__(self):
        _check_rank2(self.grid, self.h, "endomorphism field")
        defect = float(np.max(np.abs(self.h - _dag(self.h))))
        if defect > 1e-12:
            raise ValueError(f"field not Hermitian (defect {defect:.2e})")


def bracket_phiphidag(P: HiggsPoint) -> np.ndarray:
    """Coefficient B of [Phi, Phi^+] = B dz ^ dzbar: B = phi phi^+ - phi^+ phi.

    Hermitian and pointwise traceless.
    """
    ph = P.phi
    return _mat(ph, _dag(ph)) - _mat(_dag(ph), ph)


def omega_higgs(A: RankTwoConn, P: HiggsPoint, x: tuple, y: tuple,
                W: float = 1.0, k: int = 0) -> float:
    """Real symplectic pairing of tangents x = (a, c), y = (b, e).

    At n=1 the exponential-Todd bracket contributes only its degree-zero
    part, leaving -(2W/pi) int [Im tr(a b^+) + Im tr(c e^+)].  The weight k
    is accepted for signature parity with the moment map; it drops out of
    the pairing here.
    """
    del k
    grid = A.grid
    a, c = x
    b, e = y
    val = np.imag(_tr(_mat(a, _dag(b)))) + np.imag(_tr(_mat(c, _dag(e))))
    return float(-(2.0 * W / np.pi) * val.mean())


def omega_tilde(A: RankTwoConn, P: HiggsPoint, x: tuple, y: tuple,
                Wt: float = 1.0) -> complex:
    """Complex symplectic pairing: -2i Wt int [-tr(e a) + tr(b c)]."""
    a, c = x
    b, e = y
    val = -_tr(_mat(e, a)) + _tr(_mat(b, c))
    return complex(-2.0j * Wt * val.mean())


def hitchin_residual(A: RankTwoConn, P: HiggsPoint, k: int, l: int
                     ) -> tuple[np.ndarray, float]:
    """Normalized curvature residual density and holomorphicity defect.

    Density R = k I + 2 H_A + B/pi - (c_{k,l}/2) I where c_{k,l} = 2k + d;
    the trace of R integrates to zero by construction of the constant.
    The defect is the sup norm of d_A^{0,1} Phi.
    """
    grid = A.grid
    ha = A.chern_matrix()
    B = bracket_phiphidag(P)
    c_kl = float(c_kl_constant(1, 2, A.deg, k, l))
    eye = np.eye(2, dtype=complex)[..., None, None]
    R = k * eye + 2.0 * ha + B / np.pi - 0.5 * c_kl * eye
    dbar_phi = holomorphicity_defect_field(A, P)
    return R, float(np.max(np.abs(dbar_phi)))


def holomorphicity_defect_field(A: RankTwoConn, P: HiggsPoint) -> np.ndarray:
    """Coefficient of d_A^{0,1} Phi = (d_zbar phi + [alpha, phi]) dzbar ^ dz."""
    g = A.grid
    out = np.empty_like(P.phi)
    for i in range(2):
        for j in range(2):
            out[i, j] = d_zbar(g, P.phi[i, j], 0)
    return out + _mat(A.a, P.phi) - _mat(P.phi, A.a)


def mu_higgs(A: RankTwoConn, P: HiggsPoint, G: HermEndoField,
             W: float = 1.0, k: int = 0, l: int = 0) -> float:
    """Moment pairing with the gauge direction g = iG: W int tr(G R)."""
    R, _ = hitchin_residual(A, P, k, l)
    return float(W * np.real(_int_tr(A.grid, _mat(G.h, R))))


def mu_tilde(A: RankTwoConn, P: HiggsPoint, g: np.ndarray,
             Wt: float = 1.0) -> complex:
    """Complex moment pairing -2i Wt int tr(g (dbar phi + [alpha, phi]))."""
    dbar_phi = holomorphicity_defect_field(A, P)
    return complex(-2.0j * Wt * _tr(_mat(g, dbar_phi)).mean())


def gauge_tangent(A: RankTwoConn, P: HiggsPoint, g: np.ndarray) -> tuple:
    """Vector field of the gauge direction g: (-(dbar_A g), [g, phi])."""
    grid = A.grid
    dg = np.empty_like(g)
    for i in range(2):
        for j in range(2):
            dg[i, j] = d_zbar(grid, g[i, j], 0)
    da = -(dg + _mat(A.a, g) - _mat(g, A.a))
    dphi = _mat(g, P.phi) - _mat(P.phi, g)
    return da, dphi


def fd_real_identity(A: RankTwoConn, P: HiggsPoint, G: HermEndoField,
                     tangent: tuple, W: float = 1.0, k: int = 0, l: int = 0,
                     steps=DEFAULT_STEPS) -> tuple[float, bool, list[float]]:
    """Order of  mu_{x+t b}(iG) - mu_x(iG) + t Omega(v_g, b)."""
    da, dphi = tangent
    v_g = gauge_tangent(A, P, 1j * G.h)
    mu0 = mu_higgs(A, P, G, W, k, l)
    pairing = omega_higgs(A, P, v_g, tangent, W, k)
    errors = []
    for t in steps:
        mu_t = mu_higgs(A.shifted(t, da), P.shifted(t, dphi), G, W, k, l)
        errors.append(abs(mu_t - mu0 + t * pairing))
    slope, exact = fit_slope(steps, errors)
    return slope, exact, errors


def fd_complex_identity(A: RankTwoConn, P: HiggsPoint, g: np.ndarray,
                        tangent: tuple, Wt: float = 1.0,
                        steps=DEFAULT_STEPS) -> tuple[float, bool, list[float]]:
    """Order of  mu~_{x+t b}(g) - mu~_x(g) + t Omega~(v_g, b)."""
    da, dphi = tangent
    v_g = gauge_tangent(A, P, g)
    mu0 = mu_tilde(A, P, g, Wt)
    pairing = omega_tilde(A, P, v_g, tangent, Wt)
    errors = []
    for t in steps:
        mu_t = mu_tilde(A.shifted(t, da), P.shifted(t, dphi), g, Wt)
        errors.append(abs(mu_t - mu0 + t * pairing))
    slope, exact = fit_slope(steps, errors)
    return slope, exact, errors


def metric_factors(a_off: np.ndarray, P: HiggsPoint, k: int = 0
                   ) -> tuple[float, float, float]:
    """Trivializing metric factors (f, h1, h2) at n=1.

    f carries the diagonal Higgs pairing; h1, h2 the real and imaginary
    parts of the mixed pairing tr(Phi ^ a).
    """
    grid = P.grid
    # i Tr(Phi ^ Phi^+) has density 2 tr(phi phi^+)
    log_f = 2.0 * float(np.real(_tr(_mat(P.phi, _dag(P.phi)))).mean())
    # Tr(Phi ^ a) = tr(phi alpha) dz ^ dzbar, density -2i tr(phi alpha)
    zeta = complex((-2.0j * _tr(_mat(P.phi, a_off))).mean())
    return float(np.exp(log_f)), float(np.exp(zeta.real)), float(np.exp(zeta.imag))


def _rotate(structure: str, tangent: tuple) -> tuple:
    a, c = tangent
    if structure == "I":
        return 1j * a, 1j * c
    if structure == "J":
        return -_dag(c), _dag(a)
    if structure == "K":
        return -1j * _dag(c), 1j * _dag(a)
    raise ValueError(f"unknown structure {structure!r}")


def fd_curvature_report(which: str, structure: str, A: RankTwoConn,
                        P: HiggsPoint, x: tuple, y: tuple,
                        step: float = 1e-3) -> tuple[float, float, float]:
    """Second-variation report for the log-metrics -log h1 / -log h2.

    Returns (fd curvature value, matching component of the complex pairing,
    difference).  No equality is asserted; the matching component is Re of
    omega_tilde for h1 and Im for h2.
    """
    if which not in ("h1", "h2"):
        raise ValueError("which must be 'h1' or 'h2'")

    def logmetric(da, dphi) -> float:
        _, h1, h2 = metric_factors(A.a + da, HiggsPoint(P.grid, P.phi + dphi))
        return -np.log(h1 if which == "h1" else h2)

    sx, sy = _rotate(structure, x), _rotate(structure, y)

    def hess(u: tuple, v: tuple) -> float:
        vals = 0.0
        for su, sv, w in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
            vals += w * logmetric(step * (su * u[0] + sv * v[0]),
                                  step * (su * u[1] + sv * v[1]))
        return vals / (4.0 * step * step)

    curv = 0.5 * (hess(x, sy) - hess(sx, y))
    om = omega_tilde(A, P, x, y)
    comp = om.real if which == "h1" else om.imag
    return float(curv), float(comp), float(curv - comp)


@dataclass(frozen=True)
class LinOpMatrix:
    """Dense real-symmetric matrix of an operator on the Fourier x Hermitian
    basis; modes |m| <= M per axis, matrices sigma/sqrt(2)."""

    mode_cap: int
    modes: tuple[tuple[int, int], ...]
    mat: np.ndarray

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.mat - self.mat.T)))


def _real_mode_functions(grid: TorusGrid, M: int):
    """Orthonormal real Fourier basis: 1, sqrt(2) cos, sqrt(2) sin, and the
    list of labels (m1, m2, kind)."""
    ax = grid.axes()
    funcs = [np.ones(grid.shape)]
    labels = [(0, 0)]
    seen = {(0, 0)}
    for m1 in range(-M, M + 1):
        for m2 in range(-M, M + 1):
            if (m1, m2) in seen or (-m1, -m2) in seen:
                continue
            seen.add((m1, m2))
            arg = 2.0 * np.pi * (m1 * ax[0] + m2 * ax[1])
            funcs.append(np.sqrt(2.0) * np.cos(arg))
            labels.append((m1, m2))
            funcs.append(np.sqrt(2.0) * np.sin(arg))
            labels.append((m1, m2))
    return np.stack(funcs), labels


def assemble_DT(P: HiggsPoint, M: int = 8) -> LinOpMatrix:
    """Matrix of the linearized operator at the flat base connection:

        DT(h) = (1/2pi) ( -Lap h / 2 + [phi,[phi^+,h]] + [phi^+,[phi,h]] )

    in the basis f_q sigma_a / sqrt(2), using the inner product
    int tr(h1 h2).  The double bracket is the symmetrized (Hermitian)
    gradient of the nonnegative form int |[phi^+, h]|^2.
    """
    grid = P.grid
    funcs, labels = _real_mode_functions(grid, M)
    nfun = funcs.shape[0]
    dim = 4 * nfun

    # pointwise matrix kernel g_ab = tr(sigma_a D(sigma_b)) / 2
    ph = P.phi
    phd = _dag(ph)
    kern = np.empty((4, 4) + grid.shape)
    for b in range(4):
        sb = np.broadcast_to(SIGMA[b][..., None, None], ph.shape)
        inner1 = _mat(phd, sb) - _mat(sb, phd)
        t1 = _mat(ph, inner1) - _mat(inner1, ph)
        inner2 = _mat(ph, sb) - _mat(sb, ph)
        t2 = _mat(phd, inner2) - _mat(inner2, phd)
        db = t1 + t2
        for a in range(4):
            kern[a, b] = 0.5 * np.real(
                np.einsum("ab...,ba...->...", SIGMA[a][..., None, None], db))

    flat = funcs.reshape(nfun, -1)
    npts = flat.shape[1]
    mat = np.zeros((dim, dim))
    for a in range(4):
        for b in range(4):
            gram = (flat * kern[a, b].reshape(1, -1)) @ flat.T / npts
            mat[a::4, b::4] += gram

    lap = np.array([(2.0 * np.pi) ** 2 * (m1 * m1 + m2 * m2) / 2.0
                    for (m1, m2) in labels])
    for a in range(4):
        idx = np.arange(a, dim, 4)
        mat[idx, idx] += lap

    mat /= 2.0 * np.pi
    mat = 0.5 * (mat + mat.T)  # discard quadrature round-off asymmetry
    return LinOpMatrix(M, tuple(labels), mat)


def kernel_diagnosis(op: LinOpMatrix, tol: float = 1e-8) -> tuple[int, int]:
    """(kernel dimension, kernel dimension on the trace-integral-zero
    subspace).  The normalization direction is the constant identity basis
    element, which is a coordinate direction here."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    evals = eigh(op.mat, eigvals_only=True)
    full = int(np.sum(evals < tol))
    keep = np.ones(op.mat.shape[0], dtype=bool)
    keep[0] = False  # constant function x identity matrix
    sub = op.mat[np.ix_(keep, keep)]
    evals_sub = eigh(sub, eigvals_only=True)
    return full, int(np.sum(evals_sub < tol))


def dt_spectrum(op: LinOpMatrix) -> np.ndarray:
    return eigh(op.mat, eigvals_only=True)
