"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fracheat.criteria import ball_sup_scan, psi_beta, psi_beta_inv
from fracheat.grid import Grid
from fracheat.kernel import ModelParams, build_profile, closed_form_kernel, fourier_inversion, subordination_kernel
from fracheat.lifespan import (
    SweepConfig,
    blowup_profile,
    dichotomy_probe,
    fit_scaling,
    lifespan_sweep,
    log_law_smoke,
    predicted_exponent,
)
from fracheat.semigroup import Constant, Field, InitialDatum, PowerLaw, Singular, apply_semigroup
from fracheat.solver import TimeMesh, march, picard_certify, supersolution_check


def record(n: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture(scope="module")
def supercritical_sweep():
    params = ModelParams(1, 1.0, 3.0)
    t0 = time.perf_counter()
    recs = lifespan_sweep(PowerLaw(0.3), np.geomspace(0.01, 0.1, 5), params, SweepConfig(M=4096, K=512), jobs=4)
    return params, recs, time.perf_counter() - t0


def test_c01_kernel_mass():
    t0 = time.perf_counter()
    defects = {th: build_profile(th, 1).mass - 1.0 for th in (0.5, 1.0, 1.5, 2.0)}
    dt = time.perf_counter() - t0
    worst = max(abs(d) for d in defects.values())
    ok = worst <= 1e-6 and dt < 10
    record(1, ok, f"max |mass - 1| = {worst:.2e} over theta in {{0.5,1,1.5,2}} ({dt:.1f}s)")
    assert ok


def test_c02_poisson_triple_agreement():
    t0 = time.perf_counter()
    r = np.linspace(0.0, 10.0, 101)
    closed = closed_form_kernel(r, 1.0, 1.0, 1)
    fourier, _ = fourier_inversion(r, 1.0, 1.0, 1, series=False)
    sub = np.array([subordination_kernel(x, 1.0, 1) for x in r])
    err = max(np.max(np.abs(fourier / closed - 1)), np.max(np.abs(sub / closed - 1)), np.max(np.abs(sub / fourier - 1)))
    dt = time.perf_counter() - t0
    ok = err <= 1e-5 and dt < 10
    record(2, ok, f"closed form / Fourier / subordination max rel err {err:.2e} on |x|<=10 ({dt:.1f}s)")
    assert ok


def test_c03_semigroup_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for N, M in ((1, 1024), (2, 128)):
        g = Grid(N, 8.0, M)
        # random smooth f: a few random bumps
        f = np.zeros(g.shape)
        for _ in range(5):
            c = rng.uniform(-4, 4, N)
            w = rng.uniform(0.5, 2.0)
            f += rng.uniform(0.1, 1.0) * np.exp(-sum((x - ci) ** 2 for x, ci in zip(g.coords, c)) / w**2)
        F = Field(g, 0.0, f)
        for theta in (0.5, 1.0, 1.5, 2.0):
            for s in (2.0**-3, 2.0**-1, 1.0):
                for t in (2.0**-2, 1.0, 2.0):
                    two = apply_semigroup(apply_semigroup(F, t, theta, clamp=False), s, theta, clamp=False).values
                    one = apply_semigroup(F, s + t, theta, clamp=False).values
                    worst = max(worst, float(np.max(np.abs(two - one))) / float(np.max(np.abs(f))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 5
    record(3, ok, f"max ||S(s)S(t)f - S(s+t)f|| / ||f|| = {worst:.2e} ({dt:.1f}s)")
    assert ok


def test_c04_ode_oracle():
    t0 = time.perf_counter()
    datum = InitialDatum(closed_form=Constant(1.0))
    errs = {}
    for theta in (1.0, 2.0):
        params = ModelParams(1, theta, 2.0)
        coarse = march(datum, params, TimeMesh(2.0, 2048), Grid(1, 16.0, 1024))
        fine = march(datum, params, TimeMesh(2.0, 4096), Grid(1, 16.0, 2048))
        errs[theta] = (abs(coarse.T_est - 1.0), abs(fine.T_est - 1.0), abs(fine.T_est / coarse.T_est - 1))
    dt = time.perf_counter() - t0
    ok = all(c <= 0.02 and f <= 0.005 and d <= 0.02 for c, f, d in errs.values()) and dt < 60
    txt = ", ".join(f"theta={k:g}: |T-1|={c:.1e} -> {f:.1e}" for k, (c, f, _) in errs.items())
    record(4, ok, f"{txt} ({dt:.1f}s)")
    assert ok


def test_c05_monotone_iteration():
    t0 = time.perf_counter()
    params = ModelParams(1, 1.0, 2.0)
    rep = picard_certify(InitialDatum(closed_form=Constant(1.0)), params, TimeMesh(0.5, 64), Grid(1, 16.0, 64), 16)
    dt = time.perf_counter() - t0
    ok = rep["defect"] <= 1e-8 * rep["scale"] and rep["march_relative_distance"] <= 0.01 and dt < 60
    record(
        5,
        ok,
        f"defect/scale {rep['relative_defect']:.1e}, Picard vs march {rep['march_relative_distance']:.1e} ({dt:.1f}s)",
    )
    assert ok


def test_c06_supercritical_exponent(supercritical_sweep):
    params, recs, dt = supercritical_sweep
    law = predicted_exponent(params, 0.3)
    fit = fit_scaling(recs, law)
    ok = abs(fit.slope - (-5.0)) <= 0.15 * 5.0 and fit.lambda_span_decades >= 1 - 1e-9 and dt < 900
    record(6, ok, f"slope {fit.slope:.4f} (theory {law.theory_slope:g}), residual {fit.residual:.1e} ({dt:.1f}s)")
    assert ok


def test_c07_subcritical_exponent():
    t0 = time.perf_counter()
    params = ModelParams(1, 1.0, 1.5)
    law = predicted_exponent(params, 2.0)
    recs = lifespan_sweep(PowerLaw(2.0), np.geomspace(1e-3, 1e-2, 5), params, SweepConfig(M=4096, K=512))
    fit = fit_scaling(recs, law)
    dt = time.perf_counter() - t0
    ok = abs(fit.slope - (-1.0)) <= 0.10 and dt < 600
    record(7, ok, f"slope {fit.slope:.4f} (theory {law.theory_slope:g}), residual {fit.residual:.1e} ({dt:.1f}s)")
    assert ok


def test_c08_critical_smoke():
    t0 = time.perf_counter()
    params = ModelParams(1, 1.0, 2.0)
    law = predicted_exponent(params, 3.0)
    recs = lifespan_sweep(PowerLaw(3.0), [0.6, 0.8, 1.0], params, SweepConfig(M=4096, K=512, q=2.0, h_max=0.5))
    smoke = log_law_smoke(recs)
    dt = time.perf_counter() - t0
    ok = (
        law.regime == "log"
        and len(smoke["T"]) == 3
        and smoke["increasing"]
        and smoke["slope"] < 0
        and dt < 900
    )
    Ts = ", ".join(f"{t:.4g}" for t in smoke["T"])
    record(8, ok, f"T = [{Ts}] for lambda = {smoke['lambda']}, loglog slope {smoke['slope']:.3f} ({dt:.1f}s)")
    assert ok


def test_c09_ball_scan_exponents():
    t0 = time.perf_counter()
    g = Grid(1, 64.0, 65536)
    slopes = {}
    for a in (0.25, 0.5):
        sigma = np.geomspace(0.5, 5.0, 11)
        scan = ball_sup_scan(InitialDatum(closed_form=Singular(a)), sigma, g)
        slopes[a] = np.polyfit(np.log(sigma), np.log(scan.sup_values), 1)[0]
    dt = time.perf_counter() - t0
    ok = all(abs(s - (1 - a)) <= 0.03 * (1 - a) for a, s in slopes.items()) and dt < 10
    record(9, ok, ", ".join(f"a={a}: slope {s:.4f} vs {1 - a}" for a, s in slopes.items()) + f" ({dt:.1f}s)")
    assert ok


def test_c10_psi_round_trip():
    t0 = time.perf_counter()
    s = np.geomspace(1e-6, 1e6, 241)
    worst = 0.0
    for beta in (0.5, 1.0, 1 / 1.5, 1 / 0.5):  # N/theta for (1, 1.5) and (1, 0.5) alongside 0.5 and 1
        back = psi_beta_inv(psi_beta(s, beta), beta)
        worst = max(worst, float(np.max(np.abs(back - s) / s)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 1
    record(10, ok, f"max relative round-trip error {worst:.1e} over 12 decades ({dt:.2f}s)")
    assert ok


def test_c11_blowup_ball_average(supercritical_sweep):
    params, recs, _ = supercritical_sweep
    spreads, spans = [], []
    for rec in recs:
        prof = blowup_profile(rec, PowerLaw(0.3), params, SweepConfig(M=4096, K=512))
        spreads.append(prof["spread"])
        spans.append(prof["window_tau_span"])
    ok = max(spreads) <= 4.0 and min(spans) >= 9.0
    record(11, ok, f"max spread {max(spreads):.3f} over windows spanning >= {min(spans):.2f}x in T - t")
    assert ok


def test_c12_supersolution_certificate():
    t0 = time.perf_counter()
    params = ModelParams(1, 1.0, 3.0)
    g = Grid(1, 64.0, 2048)
    alpha = (1 + params.p) / 2
    lam = 0.02
    small = supersolution_check("alpha_mean", InitialDatum(closed_form=PowerLaw(2.0), amplitude=lam), params, g, alpha=alpha)
    big = supersolution_check(
        "alpha_mean", InitialDatum(closed_form=PowerLaw(2.0), amplitude=50 * lam), params, g, alpha=alpha
    )
    dt = time.perf_counter() - t0
    ok = small["margin"] >= 0 and big["margin"] < 0 and dt < 120
    record(12, ok, f"margin {small['margin']:.2e} at lambda={lam}, {big['margin']:.2e} at {50 * lam:g} ({dt:.1f}s)")
    assert ok


def test_c13_dichotomy_stability():
    t0 = time.perf_counter()
    params = ModelParams(1, 1.0, 3.0)
    res = dichotomy_probe(params, "singular", (0.1, 0.5), 1.0, [1024, 2048], L=16.0, K=256, q=2.0, rel_width=0.1)
    dt = time.perf_counter() - t0
    ok = all(res.overlap) and max(res.widths) <= 0.2 and dt < 1200
    br = "; ".join(f"M={b['M']}: [{b['lo']:.4g}, {b['hi']:.4g}]" for b in res.brackets)
    record(13, ok, f"{br}, width {max(res.widths):.1%} ({dt:.1f}s)")
    assert ok
    assert math.isfinite(res.drift[0])
