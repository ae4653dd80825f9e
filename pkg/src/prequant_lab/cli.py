"""Experiment runner: config parsing, deterministic seeding, scenario
dispatch, and report emission.

Config files are JSON (nested key/value). Unknown keys are rejected and
numeric parameters are range-checked at parse time; all randomness flows
through a counter-based generator seeded from --seed (or the config).

    prequant-lab <subcommand> --config <file> [--seed S] [--out DIR]

Subcommands: verify-chern, solve-gma, verify-moment, hitchin-lab,
solve-cym, all.  Exit status is 0 iff every verdict passes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import chern, cym, higgs, moment
from .fields import (
    ClosedKKSpec,
    ScalarField,
    TopForm,
    TorusGrid,
    fourier_mode,
    integrate,
    omega_power_top,
    reference_omega,
)
from .gma import (
    GmaProblem,
    NewtonConfig,
    check_compatibility,
    continuation_solve,
    newton_solve,
)
from .gma import residual as gma_residual
from .report import RunReport, check, write_report

SUBCOMMANDS = ("verify-chern", "solve-gma", "verify-moment",
               "hitchin-lab", "solve-cym", "all")
SLOPE_CAP = 99.0  # stand-in for "machine exact" in JSON-safe verdicts


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------


def _expect(cfg: dict, key: str, typ, default=None, where=""):
    loc = f"{where}.{key}" if where else key
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key '{loc}'")
        return default
    val = cfg[key]
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if typ is not None and not isinstance(val, typ) or isinstance(val, bool):
        raise ConfigError(
            f"key '{loc}': expected {getattr(typ, '__name__', typ)}, "
            f"got {type(val).__name__}")
    return val


def _reject_unknown(cfg: dict, allowed: set[str], where: str):
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}.{key}'" if where
                              else f"unknown key '{key}'")


def _positive(val, key):
    if val <= 0:
        raise ConfigError(f"key '{key}' must be positive, got {val}")
    return val


def _mode_tuple(raw, naxes: int, key: str) -> tuple[int, ...]:
    if (not isinstance(raw, list) or len(raw) != naxes
            or not all(isinstance(v, int) and not isinstance(v, bool)
                       for v in raw)):
        raise ConfigError(f"key '{key}': expected a list of {naxes} integers")
    return tuple(raw)


def _profile_field(grid: TorusGrid, entries, key: str) -> ScalarField:
    """Sum of named Fourier-mode profiles."""
    if not isinstance(entries, list):
        raise ConfigError(f"key '{key}': expected a list of mode entries")
    total = ScalarField.zero(grid)
    for i, e in enumerate(entries):
        where = f"{key}[{i}]"
        if not isinstance(e, dict):
            raise ConfigError(f"key '{where}': expected an object")
        _reject_unknown(e, {"mode", "amplitude", "phase"}, where)
        mode = _mode_tuple(_expect(e, "mode", None, where=key), grid.naxes,
                           f"{where}.mode")
        amp = _expect(e, "amplitude", float, where=key)
        phase = _expect(e, "phase", float, default=0.0, where=key)
        total = total + fourier_mode(grid, mode, amp, phase)
    return total.mean_zero()


def _grid_from(cfg: dict, where: str, default_n: int | None = None) -> TorusGrid:
    n = _expect(cfg, "n", int, default=default_n, where=where)
    pts = _expect(cfg, "pts", int, where=where)
    if n not in (1, 2):
        raise ConfigError(f"key '{where}.n' must be 1 or 2, got {n}")
    if pts < 8 or pts & (pts - 1):
        raise ConfigError(
            f"key '{where}.pts' must be a power of two >= 8, got {pts}")
    return TorusGrid(n=n, pts=pts)


def _fraction(raw, key: str) -> Fraction:
    try:
        if isinstance(raw, str):
            return Fraction(raw)
        if isinstance(raw, int) and not isinstance(raw, bool):
            return Fraction(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"key '{key}': not a rational: {raw!r}") from exc
    raise ConfigError(f"key '{key}': expected an integer or 'p/q' string")


def _finite_slope(slope: float, exact: bool) -> float:
    if exact or not math.isfinite(slope):
        return SLOPE_CAP
    return slope


# ---------------------------------------------------------------------------
# Scenario handlers: each takes (config dict, rng) and fills a RunReport.
# ---------------------------------------------------------------------------


def run_verify_chern(cfg: dict, rng, rep: RunReport):
    _reject_unknown(cfg, {"n_list", "trials", "seed"}, "")
    n_list = _expect(cfg, "n_list", list, default=[1, 2, 3, 4])
    trials = _expect(cfg, "trials", int, default=50)
    if trials < 0:
        raise ConfigError("key 'trials' must be nonnegative")
    rows = []
    for n in n_list:
        if not isinstance(n, int) or n < 1 or n > 6:
            raise ConfigError(f"key 'n_list': entries must be 1..6, got {n}")
        sys_n = chern.solve_lk(n)
        cap = n + 1
        ok = all(
            sys_n.ch_combination(k, cap)
            == chern.TruncPoly.monomial(cap, n + 1 - k, sys_n.clearing)
            for k in range(n + 1))
        rep.add(check(f"Lk identity exact (n={n})", 0 if ok else 1, 0, "exact"))
        failures = 0
        for _ in range(trials):
            alphas = [
                chern.TruncPoly.monomial(
                    cap, k,
                    Fraction(int(rng.integers(-9, 10)),
                             int(rng.integers(1, 10))))
                for k in range(1, n + 1)
            ]
            lhs = chern.build_L(n, alphas, sys_n)
            rhs = chern.build_L_rhs(n, alphas, sys_n.clearing)
            if lhs != rhs:
                failures += 1
        rep.add(check(f"build_L matches displayed RHS (n={n}, {trials} trials)",
                      failures, 0, "exact"))
        rows.append((n, sys_n.clearing, 0 if ok else 1, failures))
    rep.add_series("chern_identities", ["n", "clearing_N", "lk_fail", "rhs_fail"],
                   rows)


def _gma_problem(cfg: dict, grid: TorusGrid) -> GmaProblem:
    coeffs = _expect(cfg, "coefficients", list)
    specs = []
    seen = set()
    for i, entry in enumerate(coeffs):
        where = f"coefficients[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"key '{where}': expected an object")
        _reject_unknown(entry, {"k", "c", "modes"}, where)
        k = _expect(entry, "k", int, where="coefficients")
        if k < 1 or k > grid.n or k in seen:
            raise ConfigError(f"key '{where}.k': need distinct k in 1..{grid.n}")
        seen.add(k)
        c = _fraction(entry["c"] if "c" in entry else 0, f"{where}.c")
        eta = (_profile_field(grid, entry["modes"], f"{where}.modes")
               if "modes" in entry else ScalarField.zero(grid))
        specs.append(ClosedKKSpec(k, c, eta))
    if seen != set(range(1, grid.n + 1)):
        raise ConfigError("key 'coefficients': need one entry per k = 1..n")
    specs.sort(key=lambda s: s.k)
    return GmaProblem(grid, tuple(specs))


def run_solve_gma(cfg: dict, rng, rep: RunReport):
    _reject_unknown(cfg, {"n", "pts", "coefficients", "tol", "max_iters",
                          "continuation_steps", "seed"}, "")
    grid = _grid_from(cfg, "")
    tol = _positive(_expect(cfg, "tol", float, default=1e-9), "tol")
    max_iters = _positive(_expect(cfg, "max_iters", int, default=25),
                          "max_iters")
    steps = _expect(cfg, "continuation_steps", int, default=0)
    if steps < 0:
        raise ConfigError("key 'continuation_steps' must be nonnegative")
    p = _gma_problem(cfg, grid)
    ncfg = NewtonConfig(tol=tol, max_iters=max_iters)
    if steps > 0:
        sol = continuation_solve(p, steps, ncfg)[-1]
    else:
        sol = newton_solve(p, ncfg)
    rep.add(check("compatibility defect", check_compatibility(p), 1e-11))
    rep.add(check("final residual sup norm",
                  gma_residual(p, sol.phi).sup_norm(), tol))
    rep.add(check("ellipticity margin", sol.ellipticity_margin, 0.0, ">="))
    rep.add_series("residual_history", ["iter", "residual"],
                   list(enumerate(sol.residual_history)))


def _random_moment_data(grid: TorusGrid, rng, scale=0.3):
    def rand_field(s):
        f = np.zeros(grid.shape)
        for _ in range(4):
            mode = tuple(int(v) for v in rng.integers(-2, 3, size=grid.naxes))
            f += rng.normal() * fourier_mode(
                grid, mode, 1.0, float(rng.uniform(0, 1))).values
        return ScalarField(grid, s * f).mean_zero()

    def rand_tangent():
        v = (rand_field(scale).values + 1j * rand_field(scale).values)
        harm = tuple(complex(rng.normal(), rng.normal()) * scale
                     for _ in range(grid.n))
        return moment.TangentU1(grid, v.astype(complex), harm)

    u = (rand_field(0.05).values + 1j * rand_field(0.05).values)
    A = moment.ConnPointU1(grid, u.astype(complex), (0.0,) * grid.n)
    return A, rand_tangent, rand_field


def run_verify_moment(cfg: dict, rng, rep: RunReport):
    _reject_unknown(cfg, {"n", "pts", "count", "seed"}, "")
    grid = _grid_from(cfg, "")
    count = _positive(_expect(cfg, "count", int, default=5), "count")
    spec0 = tuple(
        ClosedKKSpec(k, Fraction(1, grid.n) if k == grid.n else
                     Fraction(grid.n - 1, grid.n), ScalarField.zero(grid))
        for k in range(1, grid.n + 1))
    p = GmaProblem(grid, spec0)
    antisym, slopes, ratios = [], [], []
    fd_rows = []
    for i in range(count):
        A, rand_tangent, rand_field = _random_moment_data(grid, rng)
        a, b = rand_tangent(), rand_tangent()
        H = moment.GaugeDirU1(rand_field(0.5))
        antisym.append(abs(moment.omega_eval(p, A, a, b)
                           + moment.omega_eval(p, A, b, a)))
        slope, exact, errors = moment.fd_moment_identity(p, A, H, b)
        slopes.append(_finite_slope(slope, exact))
        for t, e in zip(moment.DEFAULT_STEPS, errors):
            fd_rows.append((i, t, e))
        ratios.append(moment.index_ratio(p, A, a, b))
    ratio_dev = max(abs(r / ratios[0] - 1.0) for r in ratios)
    rep.add(check("pairing antisymmetry max defect", max(antisym), 1e-12))
    rep.add(check("fd moment identity min order", min(slopes), 1.9, ">="))
    rep.add(check("families-index ratio max relative drift", ratio_dev, 1e-9))
    rep.add_series("fd_errors", ["config", "t", "error"], fd_rows)
    rep.add_series("index_ratio", ["config", "ratio"],
                   list(enumerate(ratios)))


HITCHIN_PRESETS = {
    "zero": (None, (4, 3)),
    "nilpotent": (np.array([[0.0, 1.0], [0.0, 0.0]]), (1, 0)),
    "diagonal": (np.array([[1.0, 0.0], [0.0, -1.0]]), (2, 1)),
}


def run_hitchin_lab(cfg: dict, rng, rep: RunReport):
    _reject_unknown(cfg, {"preset", "k", "l", "M", "pts", "seed"}, "")
    preset = _expect(cfg, "preset", str, default="zero")
    if preset not in (*HITCHIN_PRESETS, "random"):
        raise ConfigError(f"key 'preset': unknown preset {preset!r}")
    kk = _expect(cfg, "k", int, default=3)
    ll = _expect(cfg, "l", int, default=0)
    M = _positive(_expect(cfg, "M", int, default=6), "M")
    pts = _expect(cfg, "pts", int, default=16)
    grid = _grid_from({"n": 1, "pts": pts}, "")
    if preset == "random":
        phi = higgs.HiggsPoint(
            grid, (rng.normal(size=(2, 2) + grid.shape)
                   + 1j * rng.normal(size=(2, 2) + grid.shape)) * 0.3)
    elif preset == "zero":
        phi = higgs.HiggsPoint.zero(grid)
    else:
        phi = higgs.HiggsPoint.constant(grid, HITCHIN_PRESETS[preset][0])
    a_off = 0.1 * (rng.normal(size=(2, 2) + grid.shape)
                   + 1j * rng.normal(size=(2, 2) + grid.shape))
    A = higgs.RankTwoConn(grid, a_off, deg=0)
    R, _ = higgs.hitchin_residual(A, phi, kk, ll)
    trace_int = abs(float(np.real((R[0, 0] + R[1, 1]).mean())))
    rep.add(check("residual trace integral", trace_int, 1e-11))
    op = higgs.assemble_DT(phi, M=M)
    rep.add(check("DT symmetry defect", op.symmetry_defect(), 1e-10))
    evals = higgs.dt_spectrum(op)
    rep.add(check("DT min eigenvalue", float(evals[0]), -1e-10, ">="))
    if preset in HITCHIN_PRESETS:
        dims = higgs.kernel_diagnosis(op)
        expected = HITCHIN_PRESETS[preset][1]
        rep.add(check(f"kernel dims == {expected} ({preset})",
                      0 if dims == expected else 1, 0, "exact"))
    rep.add_series("dt_spectrum", ["index", "eigenvalue"],
                   list(enumerate(float(v) for v in evals)))


def run_solve_cym(cfg: dict, rng, rep: RunReport):
    _reject_unknown(cfg, {"n", "pts", "alpha", "degE", "eta", "tol",
                          "continuation_steps", "seed"}, "")
    grid = _grid_from(cfg, "", default_n=2)
    if grid.n != 2:
        raise ConfigError("key 'n': the coupled system needs n = 2")
    alpha = _expect(cfg, "alpha", float, default=0.05)
    if alpha < 0:
        raise ConfigError("key 'alpha' must be nonnegative")
    degE = _expect(cfg, "degE", int, default=0)
    tol = _positive(_expect(cfg, "tol", float, default=1e-9), "tol")
    steps = _positive(_expect(cfg, "continuation_steps", int, default=5),
                      "continuation_steps")
    eta_cfg = _expect(cfg, "eta", dict, default={"amplitude": 0.05})
    _reject_unknown(eta_cfg, {"mode", "amplitude"}, "eta")
    amp = _expect(eta_cfg, "amplitude", float, default=0.05, where="eta")
    mode = _mode_tuple(eta_cfg.get("mode", [1, 0, 0, 0]), grid.naxes,
                       "eta.mode")
    flat = omega_power_top(reference_omega(grid))
    bump = fourier_mode(grid, mode, amp).values
    eta = TopForm(grid, flat.density * (1.0 + bump))
    if float(np.min(eta.density)) <= 0:
        raise ConfigError("key 'eta.amplitude': profile must stay positive")
    p = cym.CymProblem(grid, alpha, eta, degE)
    path = cym.alpha_continuation(p, alpha, steps,
                                  cym.CymNewtonConfig(tol=tol))
    res_max = max(r for _, _, r, _ in path)
    rep.add(check("path max residual sup norm", res_max, tol))
    phi0 = path[0][1].phi
    drift = max(float(np.max(np.abs(st.phi.values - phi0.values)))
                for _, st, _, _ in path)
    rep.add(check("alpha response sup|phi_a - phi_0|", drift, 1e-12))
    a_fin, s_fin, _, _ = path[-1]
    p_fin = cym.normalized_problem(cym.CymProblem(grid, a_fin, eta, degE))
    pt = cym.state_point(p_fin, s_fin)
    lam = cym.compute_lambda(p_fin)
    mu_max = 0.0
    for _ in range(3):
        HE = ScalarField(grid, rng.normal(size=grid.shape)).mean_zero()
        HL = ScalarField(grid, rng.normal(size=grid.shape)).mean_zero()
        mu_max = max(mu_max, abs(cym.mu_alpha_eval(
            pt, HE, HL, 1.0, p_fin.alpha, lam, p_fin.eta)))
    rep.add(check("moment map at solution", mu_max, 1e-8))
    rep.add(check("admissibility defect (rescaled)",
                  cym.check_eta_admissible(p_fin), 1e-10))
    rep.add_series("alpha_path", ["alpha", "residual", "newton_iters"],
                   [(a, r, it) for a, _, r, it in path])


HANDLERS = {
    "verify-chern": run_verify_chern,
    "solve-gma": run_solve_gma,
    "verify-moment": run_verify_moment,
    "hitchin-lab": run_hitchin_lab,
    "solve-cym": run_solve_cym,
}


def run_all(cfg: dict, rng, rep: RunReport):
    _reject_unknown(cfg, {"scenarios", "seed"}, "")
    scenarios = _expect(cfg, "scenarios", list, default=[])
    for i, sc in enumerate(scenarios):
        where = f"scenarios[{i}]"
        if not isinstance(sc, dict):
            raise ConfigError(f"key '{where}': expected an object")
        sub = _expect(sc, "subcommand", str, where=where)
        if sub not in HANDLERS:
            raise ConfigError(f"key '{where}.subcommand': unknown {sub!r}")
        inner = {k: v for k, v in sc.items() if k != "subcommand"}
        sub_rep = RunReport(sub, inner, rep.seed)
        HANDLERS[sub](inner, rng, sub_rep)
        for v in sub_rep.verdicts:
            rep.add(check(f"{sub}[{i}]: {v.name}", v.measured, v.threshold,
                          v.comparison))
        for name, s in sub_rep.series.items():
            rep.add_series(f"{sub}_{i}_{name}", s.headers, s.rows)


def run(subcommand: str, config_path, seed: int | None = None,
        out=None) -> RunReport:
    path = Path(config_path)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}: "
                          f"{exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    if seed is None:
        seed = _expect(cfg, "seed", int, default=0)
    rng = np.random.Generator(np.random.Philox(seed))
    rep = RunReport(subcommand, cfg, seed)
    t0 = time.perf_counter()
    if subcommand == "all":
        run_all(cfg, rng, rep)
    else:
        HANDLERS[subcommand](cfg, rng, rep)
    rep.timing_s = time.perf_counter() - t0
    if out is None:
        out = os.environ.get("PREQUANT_LAB_OUT", "out")
    write_report(rep, Path(out))
    return rep


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prequant-lab",
        description="Moment-map PDE verification lab on flat complex tori")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    try:
        rep = run(args.subcommand, args.config, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for v in rep.verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"[{status}] {v.name}: {v.measured:.6g} "
              f"{v.comparison} {v.threshold:.6g}")
    print(f"{'OK' if rep.all_pass else 'FAILED'} "
          f"({sum(v.passed for v in rep.verdicts)}/{len(rep.verdicts)} checks)")
    return 0 if rep.all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
