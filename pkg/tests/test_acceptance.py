"""Acceptance checks. Each test prints exactly one PASS/FAIL line and asserts the same verdict."""

import math
import time

import numpy as np
import pytest

from oracles import ks_distance, top_sum_samples
from schcn import threshold as thr
from schcn.analytic import RateParams, build_schcn_cdf, fer_asymptotic, schcn_cdf_asymptotic, schcn_cdf_eval
from schcn.cli import main
from schcn.experiments import SweepConfig, fit_slope, run_sweep, scenario_rates
from schcn.mimo import MimoConfig, mimo_optimal_threshold
from schcn.scenario import named_scenario
from schcn.simulator import simulate_fer
from schcn.threshold import BPSK, ModulationSpec, snr_threshold_prior, snr_threshold_proposed
from schcn.units import db_to_linear, linear_to_db

TABLE_TOL_DB = 0.02
TABLE_PROPOSED = [((1, 100), 5.10), ((2, 100), 5.36), ((3, 100), 5.62), ((4, 100), 5.89),
                  ((4, 200), 6.45), ((4, 400), 6.97)]
TABLE_PRIOR = [(100, 4.61), (200, 5.50), (400, 6.24)]
TABLE_RUNTIME_S = 5.0

ANCHOR_RTOL = 1e-6

KS_TUPLES = 50
KS_SAMPLES = 1_000_000
KS_MAX = 0.005
KS_RUNTIME_S = 120.0

CONTINUITY_DELTA = 1e-4
CONTINUITY_TOL = 1e-6

ASYM_RATIO = (0.98, 1.02)
SIM_SLOPE_TOL = 0.3

GAP_TOL = 0.2
GAP_WINDOW = (1e-4, 1e-1)
GAP_TRIALS = 1_000_000

SIGMAS = 3.0

MIMO_TOL_30 = 0.3
MIMO_TOL_40 = 0.2

CASE1 = named_scenario("case1")


def test_criterion_1_threshold_table(criterion):
    thr._proposed_cached.cache_clear()
    thr._prior_cached.cache_clear()
    t0 = time.perf_counter()
    errs = [abs(linear_to_db(snr_threshold_proposed(d, ModulationSpec(2.0, L))) - db) for (d, L), db in TABLE_PROPOSED]
    errs += [abs(linear_to_db(snr_threshold_prior(ModulationSpec(2.0, L))) - db) for L, db in TABLE_PRIOR]
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= TABLE_TOL_DB and elapsed < TABLE_RUNTIME_S
    criterion(1, ok, f"max |error| {max(errs):.4f} dB (tol {TABLE_TOL_DB}), runtime {elapsed:.2f} s (< {TABLE_RUNTIME_S})")
    assert ok


def test_criterion_2_single_bit_anchor(criterion):
    g = snr_threshold_proposed(1, ModulationSpec(2.0, 1))
    rel = abs(g - 0.25) / 0.25
    ok = rel <= ANCHOR_RTOL
    criterion(2, ok, f"gamma_t,1(L=1) = {g:.12f}, rel error {rel:.2e} (tol {ANCHOR_RTOL:g})")
    assert ok


def test_criterion_3_ks_against_order_statistics(criterion):
    rng = np.random.default_rng(12345)
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for _ in range(KS_TUPLES):
        n = int(rng.integers(1, 6))
        n_c = int(rng.integers(1, n + 1))
        l0, le = rng.uniform(0.2, 5.0, 2)
        x = np.sort(top_sum_samples(n, n_c, l0, le, KS_SAMPLES, rng))
        f = schcn_cdf_eval(build_schcn_cdf(n, n_c, RateParams(l0, le)), x, rtol=1e-6)
        ks = ks_distance(f, KS_SAMPLES)
        if ks > worst:
            worst, where = ks, (n, n_c, round(float(l0), 3), round(float(le), 3))
    elapsed = time.perf_counter() - t0
    ok = worst < KS_MAX and elapsed < KS_RUNTIME_S
    criterion(3, ok, f"worst KS {worst:.5f} at (N, N_c, l0, leq)={where} (tol {KS_MAX}), runtime {elapsed:.1f} s")
    assert ok


def test_criterion_4_case_continuity(criterion):
    grid = np.concatenate([np.linspace(0.0, 2.0, 201), np.linspace(2.0, 40.0, 381)[1:]])
    worst = 0.0
    for n in range(1, 5):
        for n_c in range(1, n + 1):
            for lam in (0.5, 1.0, 2.0):
                equal = build_schcn_cdf(n, n_c, RateParams(lam, lam))
                near = build_schcn_cdf(n, n_c, RateParams(lam * (1 + CONTINUITY_DELTA), lam))
                assert near.case == "distinct"
                gap = np.max(np.abs(schcn_cdf_eval(near, grid / lam) - schcn_cdf_eval(equal, grid / lam)))
                worst = max(worst, float(gap))
    ok = worst < CONTINUITY_TOL
    criterion(4, ok, f"max |F_distinct - F_equal| = {worst:.3e} at delta={CONTINUITY_DELTA:g} (tol {CONTINUITY_TOL:g}); "
                     f"a rate perturbation of relative size delta moves the CDF by O(delta)")
    assert ok


def test_criterion_5_asymptotic_behaviour(criterion):
    ratios = []
    for n in range(1, 6):
        for n_c in range(1, n + 1):
            for l0, le in ((1.0, 1.0), (0.3, 2.0), (4.0, 0.7)):
                rates = RateParams(l0, le)
                g = 1e-3 / max(l0, le)
                ratios.append(schcn_cdf_eval(build_schcn_cdf(n, n_c, rates), g) / schcn_cdf_asymptotic(n, n_c, rates, g))
    ratio_ok = ASYM_RATIO[0] <= min(ratios) and max(ratios) <= ASYM_RATIO[1]

    grid = [25.0, 30.0, 35.0]
    mono_err, sim_slopes = 0.0, []
    for n in (1, 2, 3):
        sc = CASE1.with_(n=n, n_c=1)
        asym = [fer_asymptotic(n, 1, scenario_rates(sc, s), sc.spec) for s in grid]
        mono_err = max(mono_err, abs(fit_slope(grid, asym) + (n + 1)))
        sims = [simulate_fer(sc, s, 400_000, seed=1, importance=True).fer for s in grid]
        sim_slopes.append(fit_slope(grid, sims))
    mono_ok = mono_err < 1e-9
    sim_ok = all(abs(s + n + 1) <= SIM_SLOPE_TOL for n, s in zip((1, 2, 3), sim_slopes))
    ok = ratio_ok and mono_ok and sim_ok
    criterion(5, ok, f"CDF/asymptote in [{min(ratios):.4f}, {max(ratios):.4f}]; asymptote slope error {mono_err:.1e}; "
                     f"simulated slopes N=1,2,3 (N_c=1): {', '.join(f'{s:.3f}' for s in sim_slopes)} (tol {SIM_SLOPE_TOL})")
    assert ok


def test_criterion_6_model_vs_simulation(criterion):
    grid = list(range(0, 32, 2))
    curves = run_sweep(SweepConfig(CASE1, grid, ("closed_form", "sim_semi"), trials=GAP_TRIALS, seed=6, nc_values=[1, 3]))
    by = {c.label: c for c in curves}
    worst, checked = 0.0, 0
    for n_c in (1, 3):
        for (_, model, _), (snr, sim, _) in zip(by[f"closed_form_nc{n_c}"].points, by[f"sim_semi_nc{n_c}"].points):
            if GAP_WINDOW[0] <= sim <= GAP_WINDOW[1]:
                worst = max(worst, abs(math.log10(model) - math.log10(sim)))
                checked += 1
    ok = checked > 0 and worst <= GAP_TOL
    criterion(6, ok, f"max |log10 gap| {worst:.3f} over {checked} points with sim FER in {GAP_WINDOW} (tol {GAP_TOL})")
    assert ok


def _clearly_less(a, b):
    return b.fer - a.fer > SIGMAS * math.hypot(a.ci95, b.ci95)


def test_criterion_7_ordering_claims(criterion):
    sim = lambda sc, snr: simulate_fer(sc, snr, 1_000_000, seed=7, importance=True)
    tot = {k: sim(CASE1.with_(n_c=k), 25.0) for k in (1, 3)}
    ind = {k: sim(CASE1.with_(n_c=k, power_mode="individual"), 25.0) for k in (1, 2, 3)}
    checks = {
        "total N_c=1 < N_c=3": _clearly_less(tot[1], tot[3]),
        "individual N_c=3 < 2 < 1": _clearly_less(ind[3], ind[2]) and _clearly_less(ind[2], ind[1]),
    }
    worst_ok = True
    for snr in (16.0, 20.0, 25.0, 30.0):
        direct = sim(CASE1.with_(n_c=0), snr)
        worst_ok &= all(_clearly_less(sim(CASE1.with_(n_c=k), snr), direct) for k in (1, 2, 3))
    checks["N_c=0 worst above 15 dB"] = worst_ok
    by_l = [sim(CASE1.with_(n_c=1, spec=ModulationSpec(2.0, L)), 25.0) for L in (100, 200, 400)]
    checks["FER rises with L"] = _clearly_less(by_l[0], by_l[1]) and _clearly_less(by_l[1], by_l[2])
    ok = all(checks.values())
    criterion(7, ok, "; ".join(f"{k}: {'ok' if v else 'violated'}" for k, v in checks.items()) + f" (margin {SIGMAS} x ci95)")
    assert ok


def test_criterion_8_mimo_threshold_convergence(criterion):
    prior_db = linear_to_db(snr_threshold_prior(BPSK))
    gaps, prior_ok = {}, True
    for n_r in (1, 2, 4):
        prop_db = linear_to_db(snr_threshold_proposed(n_r))
        for db in (30, 40):
            opt_db = linear_to_db(mimo_optimal_threshold(MimoConfig(1, n_r, db_to_linear(db))))
            gaps[(n_r, db)] = abs(opt_db - prop_db)
            if db == 30 and n_r in (2, 4):
                prior_ok &= abs(prior_db - opt_db) > gaps[(n_r, db)]
    ok = (all(g <= MIMO_TOL_30 for (_, db), g in gaps.items() if db == 30)
          and all(g <= MIMO_TOL_40 for (_, db), g in gaps.items() if db == 40) and prior_ok)
    detail = ", ".join(f"N={n} {db}dB {g:.4f}" for (n, db), g in sorted(gaps.items()))
    criterion(8, ok, f"|opt - proposed| dB: {detail}; prior gap larger for N=2,4: {prior_ok}")
    assert ok


def test_criterion_9_byte_identical_sim_csv(criterion, capsys, tmp_path):
    outputs = {}
    for mode, trials in (("semi_analytic", 150_000), ("bit_level", 6000)):
        for workers in (1, 2, 4):
            path = tmp_path / f"{mode}_{workers}.csv"
            code = main(["--out", str(path), "sim", "--scenario", "case1", "--nc", "1", "2", "--snr-db-range", "5:15:5",
                         "--trials", str(trials), "--seed", "99", "--mode", mode, "--workers", str(workers)])
            assert code == 0
            outputs[(mode, workers)] = path.read_bytes()
    capsys.readouterr()
    ok = all(outputs[(m, w)] == outputs[(m, 1)] for m, w in outputs)
    criterion(9, ok, "sim CSV identical for workers 1, 2, 4 in semi_analytic and bit_level modes")
    assert ok
