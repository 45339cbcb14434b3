"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION <n> PASS|FAIL: ...`` line and then
asserts it. The lines are repeated in the pytest terminal summary. Run alone
with ``pytest tests/test_acceptance.py -v`` (about six minutes on one core).
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.signal import lfilter

from msis.baseline import SampEnConfig, sample_entropy
from msis.estimation import d_significance, whittle_d
from msis.fracdiff import ArfiModel, ArPolynomial, poles_to_ar
from msis.simulate import SimSpec, StudyConfig, generate_replicate, run_cell
from msis.statespace import (
    ar_to_ss,
    design_fir_lowpass,
    multiscale_storage,
    process_variance,
    track_residuals,
)

from oracles import brute_sampen, yule_walker_storage

AR2 = poles_to_ar([(0.8, 0.1)]).b
TAUS = range(1, 51)
RESIDUAL_LIMIT = 1e-9

RESULTS: list[str] = []


def report(number, ok, detail):
    line = f"CRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module", autouse=True)
def solver_log():
    # every Lyapunov/DARE solve made by criteria 1-8 lands here
    with track_residuals() as log:
        yield log


def _study(d, n, estimators, reps=100):
    cfg = StudyConfig(poles=[[(0.8, 0.1)]], d=[d], n=[n], reps=reps, seed=0,
                      estimators=estimators, tau_max=50)
    t0 = time.perf_counter()
    cells = run_cell(cfg, cfg.poles[0], d, n)
    return {c.estimator: c for c in cells}, time.perf_counter() - t0


@pytest.fixture(scope="module")
def coverage_study():
    return _study(0.7, 300, ("earfi", "ear"))


def test_criterion_01_closed_form():
    model = ArfiModel([0.5], 0.0, 1.0)
    s1 = multiscale_storage(model, 0, 48, [1]).S[0]
    var = process_variance(ar_to_ss(ArPolynomial([0.5]), 1.0))
    elapsed = []
    for _ in range(20):
        t0 = time.perf_counter()
        multiscale_storage(model, 0, 48, [1])
        process_variance(ar_to_ss(ArPolynomial([0.5]), 1.0))
        elapsed.append(time.perf_counter() - t0)
    err_s = abs(s1 - 0.5 * math.log(4 / 3))
    err_v = abs(var - 4 / 3)
    best = min(elapsed)
    ok = err_s < 1e-12 and err_v < 1e-12 and best < 1e-3
    report(1, ok, f"|S(1) - 0.5 ln(4/3)| = {err_s:.1e}, |var - 4/3| = {err_v:.1e}, "
                  f"runtime {best * 1e3:.3f} ms")


def test_criterion_02_white_noise_zero_law():
    t0 = time.perf_counter()
    S = multiscale_storage(ArfiModel([], 0.0), 50, 48, TAUS).S
    elapsed = time.perf_counter() - t0
    worst = int(np.argmax(np.abs(S)))
    ok = np.max(np.abs(S)) <= 1e-9 and elapsed < 5
    report(2, ok, f"max |S| = {abs(S[worst]):.2e} at tau={worst + 1} (limit 1e-9), "
                  f"S(1) = {S[0]:.1e}, {np.sum(np.abs(S) > 1e-9)}/50 scales above limit, "
                  f"runtime {elapsed:.2f} s")


def test_criterion_03_monte_carlo():
    t0 = time.perf_counter()
    taus = [1, 2, 5, 10]
    errors = {}
    for d in (0.0, 0.4):
        model = ArfiModel(AR2, d)
        theory = multiscale_storage(model, 50, 48, taus).S
        x = generate_replicate(SimSpec(model, 1 << 20, seed=0), 0)
        for tau, s in zip(taus, theory):
            taps = design_fir_lowpass(48, 0.5 if tau == 1 else 1 / (2 * tau)).taps
            y = lfilter(taps, [1.0], x)[taps.size:][::tau]
            errors[(d, tau)] = abs(yule_walker_storage(y, 120) - s)
    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = errors[worst] < 0.05 and elapsed < 120
    report(3, ok, f"max |S_theory - S_empirical| = {errors[worst]:.4f} nats at d={worst[0]}, "
                  f"tau={worst[1]} (limit 0.05), runtime {elapsed:.1f} s")


def test_criterion_04_ordering_in_d():
    t0 = time.perf_counter()
    s = [multiscale_storage(ArfiModel(AR2, d), 50, 48, [10]).S[0] for d in (0.0, 0.4, 0.7)]
    a09 = poles_to_ar([(0.9, 0.1)]).b
    s0, s7 = (multiscale_storage(ArfiModel(a09, d), 50, 48, [1]).S[0] for d in (0.0, 0.7))
    elapsed = time.perf_counter() - t0
    ok_a = s[0] < s[1] < s[2]
    ok_b = s7 < s0
    report(4, ok_a and ok_b and elapsed < 10,
           f"(a) rho=0.8 at f_tau=0.05: S = {s[0]:.4f}, {s[1]:.4f}, {s[2]:.4f} for d = 0, 0.4, 0.7 "
           f"[{'ok' if ok_a else 'violated'}]; (b) rho=0.9 at tau=1: S(d=0.7) = {s7:.4f} vs "
           f"S(d=0) = {s0:.4f} [{'ok' if ok_b else 'violated'}]; runtime {elapsed:.2f} s")


def test_criterion_05_truncation_bias():
    t0 = time.perf_counter()
    taus = range(10, 51)
    model = ArfiModel(AR2, 0.7)
    s10 = multiscale_storage(model, 10, 48, taus).S
    s50 = multiscale_storage(model, 50, 48, taus).S
    elapsed = time.perf_counter() - t0
    gap = s50 - s10
    ok = np.all(gap > 0) and elapsed < 10
    report(5, ok, f"min S(q=50) - S(q=10) over f_tau <= 0.05 = {gap.min():.4f}, "
                  f"runtime {elapsed:.2f} s")


def test_criterion_06_coverage(coverage_study):
    cells, elapsed = coverage_study
    earfi, ear = cells["earfi"], cells["ear"]
    theory = earfi.theory
    inside = (earfi.p10 <= theory) & (theory <= earfi.p90)
    coverage = float(np.mean(inside))
    low = earfi.f_tau <= 0.05
    ratio = ear.median[low] / theory[low]
    ok = coverage >= 0.9 and np.all(ratio < 0.5) and elapsed < 900
    report(6, ok, f"eARFI band covers theory at {coverage:.0%} of scales (need 90%), "
                  f"max eAR median / theory at f_tau <= 0.05 = {np.max(ratio):.3f} (need < 0.5), "
                  f"{len(earfi.errors)} failed eARFI fits, runtime {elapsed:.0f} s")


def test_criterion_07_consistency():
    t0 = time.perf_counter()
    mad = {}
    for d in (0.0, 0.4, 0.7):
        for n in (300, 4096):
            cell = _study(d, n, ("earfi",))[0]["earfi"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                mad[(d, n)] = float(np.mean(np.nanmedian(np.abs(cell.samples - cell.theory), axis=0)))
    elapsed = time.perf_counter() - t0
    ok = all(mad[(d, 4096)] < mad[(d, 300)] for d in (0.0, 0.4, 0.7)) and elapsed < 1800
    parts = ", ".join(f"d={d}: {mad[(d, 300)]:.4f} -> {mad[(d, 4096)]:.4f}" for d in (0.0, 0.4, 0.7))
    report(7, ok, f"mean-over-tau median |S_hat - S| at N=300 -> N=4096: {parts}, "
                  f"runtime {elapsed:.0f} s")


def test_criterion_08_baseline_failure(coverage_study):
    rmse, elapsed = _study(0.7, 300, ("rmse",))
    rmse = rmse["rmse"]
    earfi = coverage_study[0]["earfi"]
    long_scales = rmse.tau >= 8
    missing = int(np.isnan(rmse.samples[:, long_scales]).any(axis=1).sum())
    i8 = int(np.flatnonzero(rmse.tau == 8)[0])
    spread_rmse = rmse.p90[i8] - rmse.p10[i8]
    spread_earfi = earfi.p90[i8] - earfi.p10[i8]
    ratio = spread_rmse / spread_earfi
    ok = missing > 0 and ratio >= 2 and elapsed < 600
    report(8, ok, f"{missing}/100 replicates with undefined entries at tau >= 8, "
                  f"10-90 spread at tau=8: {spread_rmse:.3f} vs eARFI {spread_earfi:.3f} "
                  f"(ratio {ratio:.2f}, need 2), runtime {elapsed:.0f} s")


def test_criterion_09_solver_health(solver_log):
    log = list(solver_log)
    if not log:
        pytest.skip("no solves recorded: criteria 1-8 were not run in this session")
    worst = max(log, key=lambda rec: rec.residual)
    bad = sum(not rec.residual < RESIDUAL_LIMIT for rec in log)
    kinds = sorted({rec.solver for rec in log})
    report(9, bad == 0, f"{len(log)} solves ({', '.join(kinds)}), {bad} above 1e-9, "
                        f"worst {worst.residual:.1e} ({worst.solver}, dim {worst.dim})")


def test_criterion_10_whittle():
    t0 = time.perf_counter()
    spec = SimSpec(ArfiModel([], 0.4), 4096, seed=0)
    d_hat = np.array([whittle_d(generate_replicate(spec, i)).d for i in range(100)])
    err = abs(float(np.median(d_hat)) - 0.4)
    rng = np.random.default_rng(0)
    fired = 0
    for _ in range(100):
        est = whittle_d(rng.standard_normal(4096))
        fired += d_significance(est.d, est.stderr, 0.05)[2]
    elapsed = time.perf_counter() - t0
    # the same estimator with the oscillatory AR(2) part added, for the record
    osc = SimSpec(ArfiModel(AR2, 0.4), 4096, seed=0)
    d_osc = float(np.median([whittle_d(generate_replicate(osc, i)).d for i in range(100)]))
    ok = err < 0.05 and fired <= 10 and elapsed < 300
    report(10, ok, f"fractional noise d=0.4: median |d_hat - 0.4| = {err:.4f} (limit 0.05); "
                   f"white noise: test fired {fired}/100 (limit 10); runtime {elapsed:.1f} s; "
                   f"with AR(2) rho=0.8 added the median d_hat is {d_osc:.3f}")


def test_criterion_11_invariances():
    worst_tap = worst_var = 0.0
    for d in (0.0, 0.4, 0.7):
        q = 50 if d else 0
        base = multiscale_storage(ArfiModel(AR2, d), q, 48, TAUS).S
        tapped = multiscale_storage(ArfiModel(AR2, d), q, 48, TAUS,
                                    design=lambda r, c: design_fir_lowpass(r, c).scaled(3.7)).S
        scaled = multiscale_storage(ArfiModel(AR2, d, 5.0), q, 48, TAUS).S
        worst_tap = max(worst_tap, float(np.max(np.abs(tapped - base))))
        worst_var = max(worst_var, float(np.max(np.abs(scaled - base))))

    exact = True
    for n, seed in ((100, 1), (500, 2), (1000, 3), (2000, 4)):
        x = np.random.default_rng(seed).standard_normal(n)
        got = sample_entropy(x, SampEnConfig())
        ref = brute_sampen(x, 2, 0.2 * np.std(x, ddof=1))
        exact &= got == ref or (math.isnan(got) and math.isnan(ref))

    x = np.random.default_rng(5).standard_normal(1000)
    base = sample_entropy(x)
    worst_affine = max(abs(sample_entropy(a * x + b) - base)
                       for a, b in ((2.5, 0.0), (1e-3, 7.0), (-4.0, -100.0), (1e3, 1e3)))
    ok = worst_tap <= 1e-10 and worst_var <= 1e-10 and exact and worst_affine <= 1e-12
    report(11, ok, f"tap scaling max dS = {worst_tap:.1e}, input-variance scaling max dS = "
                   f"{worst_var:.1e}, SampEn brute force exact up to N=2000: {exact}, "
                   f"affine max dSampEn = {worst_affine:.1e}")
