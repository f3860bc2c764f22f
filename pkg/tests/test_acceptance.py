"""Acceptance criteria 1-10, one test each.

Every test records a single PASS/FAIL line, printed in the pytest terminal
summary.  Thresholds are the contractual ones; nothing is loosened to make a
line pass.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy import special as sp

from truncprod import asymptotics as asy
from truncprod import harness
from truncprod.core import EnsembleParams, h_moment
from truncprod.finite_kernel import CorrelationRequest, build_kernel, correlation_k
from truncprod.sampler import RngStream
from truncprod.weights import build_weight, weight_convolve_check, weight_eval, weight_eval_mellin_barnes

from conftest import ACCEPTANCE_LINES, SWEEP, UNEQUAL

THREADS = min(4, os.cpu_count() or 1)
SEED = 20261015


def _record(k: int, ok: bool, text: str) -> None:
    ACCEPTANCE_LINES[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}"
    print(ACCEPTANCE_LINES[k])


def _beta_closed_form(l, x):
    return l * (1 - x) ** (l - 1)


def test_criterion_01_weight_triple_agreement():
    t0 = time.perf_counter()
    xs = np.linspace(0.05, 0.95, 20)
    worst = 0.0
    for params in SWEEP + UNEQUAL:
        w = build_weight(params)
        for x in xs:
            table = float(weight_eval(w, x))
            mb = weight_eval_mellin_barnes(params, x)
            # M = 1 has no convolution; the Beta density is the third evaluator
            third = (weight_convolve_check(params, x) if params.m >= 2
                     else _beta_closed_form(params.truncations[0], x))
            worst = max(worst, abs(table - mb), abs(table - third), abs(mb - third))
    closed = 0.0
    for m in range(1, 6):
        w = build_weight(EnsembleParams.equal(1, m, 1))
        for x in xs:
            ref = math.log(1 / x) ** (m - 1) / math.factorial(m - 1)
            closed = max(closed, abs(weight_eval(w, x) - ref))
    for l in range(1, 7):
        w = build_weight(EnsembleParams.equal(1, 1, l))
        closed = max(closed, max(abs(weight_eval(w, x) - _beta_closed_form(l, x)) for x in xs))
    w = build_weight(EnsembleParams.equal(1, 2, 2))
    closed = max(closed, max(abs(weight_eval(w, x) - (-8 * (1 - x) - 4 * (1 + x) * math.log(x))) for x in xs))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and closed < 1e-12 and elapsed < 10
    _record(1, ok, f"max disagreement {worst:.2e} (< 1e-8), closed forms {closed:.2e} (< 1e-12), "
                   f"{elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_02_moments():
    worst = 0.0
    for params in SWEEP + UNEQUAL:
        w = build_weight(params)
        for j in range(11):
            target = 1 / math.prod(math.comb(l + j, j) for l in params.truncations)
            worst = max(worst, abs(w.integral(j) / target - 1))
            worst = max(worst, abs(h_moment(params, j) / target - 1))
    ok = worst < 1e-10
    _record(2, ok, f"max relative moment error {worst:.2e} (< 1e-10), j <= 10, {len(SWEEP + UNEQUAL)} cases")
    assert ok


def test_criterion_03_determinant_brute_force():
    rng = np.random.default_rng(SEED)
    cases = [EnsembleParams.equal(n, m, l) for n, m, l in
             [(1, 2, 2), (2, 1, 1), (3, 2, 2), (4, 3, 1), (5, 2, 3), (6, 1, 4), (6, 2, 1)]]
    cases.append(EnsembleParams(5, 3, (1, 2, 3)))
    worst = 0.0
    for params in cases:
        n = params.n
        fk, w = build_kernel(params), build_weight(params)
        # joint density normalised to one
        log_z = math.lgamma(n + 1) + sum(math.log(math.pi * h_moment(params, j)) for j in range(n))
        for _ in range(50):
            r = np.sqrt(rng.uniform(0.01, 0.81, n))
            z = r * np.exp(2j * np.pi * rng.random(n))
            vdm = np.prod([abs(z[a] - z[b]) ** 2 for a in range(n) for b in range(a)])
            pdf = np.prod(weight_eval(w, np.abs(z) ** 2)) * vdm * math.exp(-log_z)
            det = correlation_k(fk, CorrelationRequest(tuple(z)))
            worst = max(worst, abs(det / (math.factorial(n) * pdf) - 1))
    ok = worst < 1e-9
    _record(3, ok, f"max relative error {worst:.2e} (< 1e-9), {len(cases)} ensembles x 50 point sets")
    assert ok


@pytest.mark.slow
def test_criterion_04_headline_monte_carlo():
    params = EnsembleParams.equal(20, 2, 3)
    t0 = time.perf_counter()
    spectra = harness.draw_spectra(params, 10000, RngStream(SEED, 0), THREADS)
    dens = harness.run_density_comparison(params, 10000, 40, RngStream(SEED, 0), THREADS, spectra=spectra)
    kost = harness.run_kostlan_comparison(params, 10000, RngStream(SEED, 1), THREADS, spectra=spectra)
    elapsed = time.perf_counter() - t0
    p_chi, p_ks = dens.statistics["chi2_p"], kost.statistics["ks_p"]
    ok = p_chi > 0.001 and p_ks > 0.01 and elapsed < 120
    _record(4, ok, f"chi2 p {p_chi:.3g} (> 0.001, max |z| {dens.statistics['max_abs_z']:.2f}), "
                   f"Kostlan KS p {p_ks:.3g} (> 0.01), {elapsed:.0f} s on {THREADS} thread(s) (< 120 s)")
    assert ok


def test_criterion_05_origin_convergence():
    reps = {m: harness.run_origin_convergence(m) for m in (1, 2, 3)}
    bessel = 0.0
    for r in np.linspace(0.05, 3, 20):
        ref = 2 * sp.k0(2 * r) * sp.i0(2 * r) / math.pi
        bessel = max(bessel, abs(asy.origin_density(2, r) / ref - 1))
    monotone = all(rep.statistics["monotone"] == 1 for rep in reps.values())
    final = {m: rep.statistics["final_max_error"] for m, rep in reps.items()}
    worst_point = {m: rep.statistics["errors"][-1] for m, rep in reps.items()}
    ok = monotone and max(final.values()) < 0.03 and bessel < 1e-9
    detail = ", ".join(f"M={m}: " + "/".join(f"{e:.3f}" for e in worst_point[m]) for m in reps)
    _record(5, ok, f"monotone={monotone}, N=80 errors at |dz|=0.5/1/2: {detail} (need < 0.03), "
                   f"M=2 Bessel check {bessel:.1e} (< 1e-9)")
    assert ok


def test_criterion_06_bulk_universality():
    literal = {m: harness.run_bulk_universality(m, convention="doubled") for m in (1, 2)}
    reproducing = {m: harness.run_bulk_universality(m, convention="reproducing") for m in (1, 2)}
    err_lit = {m: r.statistics["max_error_over_rho"] for m, r in literal.items()}
    err_rep = {m: r.statistics["max_error_over_rho"] for m, r in reproducing.items()}
    ok = max(err_lit.values()) < 0.05
    _record(6, ok, "target rho exp(-pi rho d^2): max error/rho "
                   + ", ".join(f"M={m} {e:.3f}" for m, e in err_lit.items()) + " (< 0.05); "
                   + "reproducing form rho exp(-pi rho d^2 / 2): "
                   + ", ".join(f"M={m} {e:.4f}" for m, e in err_rep.items()))
    assert ok


@pytest.mark.slow
def test_criterion_07_edge_arbitration():
    parts, ok = [], True
    for m in (1, 2):
        rep = harness.run_edge_profile(EnsembleParams.equal(100, m, 100), 10000, RngStream(SEED, 10 + m), THREADS)
        s = rep.statistics
        good = s["c2_rel_dev"] < 0.10 and s["separation_sigma"] >= 5
        ok &= good
        c2_sig = s["c2_err"] / rep.extra["limit_prediction"]["c2"]
        parts.append(f"M={m}: c2 dev {s['c2_rel_dev']:.3f} +- {c2_sig:.3f} (< 0.10), decision {rep.extra['decision']} "
                     f"(z_half {s['z_half_bulk']:.1f}, z_full {s['z_full_bulk']:.1f}, "
                     f"separation {s['separation_sigma']:.0f} sigma >= 5)")
    _record(7, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_08_weak_limit():
    parts, ok = [], True
    for m in (1, 2):
        rep = harness.run_weak_profile(EnsembleParams.equal(100, m, 1), 10000, RngStream(SEED, 20 + m), THREADS)
        p = rep.statistics["chi2_p"]
        ok &= p > 0.001
        parts.append(f"M={m} chi2 p {p:.3g} (> 0.001)")
    small = harness.draw_spectra(EnsembleParams.equal(100, 1, 1), 2000, RngStream(SEED, 30), THREADS)
    large = harness.draw_spectra(EnsembleParams.equal(400, 1, 1), 250, RngStream(SEED, 31), THREADS)
    rep = harness.run_interior_fraction(small, large, 1, 1)
    s = rep.statistics
    ok &= rep.passed
    parts.append(f"interior ratio {s['ratio']:.3f} +- {s['ratio_err']:.3f} vs predicted "
                 f"{s['predicted_ratio']:.3f} ({s['z_predicted']:.1f} sigma < 3; {s['z_half']:.1f} sigma from 1/2)")
    _record(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_weak_bulk_crossover():
    parts, ok = [], True
    for m in (1, 2):
        rep = harness.run_weak_bulk_crossover(m)
        devs = rep.statistics["max_deviation"]
        ok &= rep.passed
        parts.append(f"M={m} max deviation " + " > ".join(f"{d:.3f}" for d in devs))
    _record(9, ok, "L = 40, 80, 160: " + "; ".join(parts) + " (must decrease)")
    assert ok


@pytest.mark.slow
def test_criterion_10_ginibre_limit():
    parts, ok = [], True
    for m in (1, 2):
        rep = harness.run_ginibre_crossover(30, 20, m, 1000, RngStream(SEED, 40 + m), THREADS)
        s = rep.statistics
        ok &= s["ks_finite_p"] > 0.01
        parts.append(f"M={m} KS p {s['ks_finite_p']:.3g} (> 0.01; uniform mu->0 law p {s['ks_macro_p']:.3g})")
    _record(10, ok, "N=30, L=600: " + "; ".join(parts))
    assert ok
