import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from truncprod import harness
from truncprod.core import EnsembleParams
from truncprod.harness import ComparisonReport, RadialHistogram, RngStream


def test_defaults_file():
    d = harness.load_defaults()
    assert d["version"] == 1
    assert d["chi2_p_min"] == 0.001 and d["min_expected"] == 25 and d["ks_p_min"] == 0.01
    with pytest.raises(KeyError):
        harness.with_thresholds(d, nonsense=1)
    assert harness.with_thresholds(d, chi2_p_min=0.01)["chi2_p_min"] == 0.01


def test_histogram_invariants():
    edges = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        RadialHistogram(np.array([0, 0.5, 0.5]), np.array([1, 1]), 1, 2)
    with pytest.raises(ValueError):
        RadialHistogram(edges, np.array([1, 1, 1, 1]), 1, 3)
    h = RadialHistogram.from_values(np.array([[0.1, 0.6, 1.5]]), edges)
    assert h.counts.sum() == 2 and h.total_eigenvalues == 3
    with pytest.raises(ValueError):
        h.merge(RadialHistogram.from_values(np.array([[0.1]]), np.linspace(0, 1, 3)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1.2), min_size=3, max_size=3), min_size=2, max_size=40),
       st.integers(1, 39))
def test_histogram_merge_equals_concatenation(rows, cut):
    values = np.array(rows)
    cut = min(cut, len(rows) - 1)
    edges = np.linspace(0, 1, 7)
    whole = RadialHistogram.from_values(values, edges)
    parts = RadialHistogram.from_values(values[:cut], edges) + RadialHistogram.from_values(values[cut:], edges)
    assert np.array_equal(whole.counts, parts.counts)
    assert (whole.n_samples, whole.total_eigenvalues) == (parts.n_samples, parts.total_eigenvalues)


def test_chi_square_dof_rules():
    obs = np.array([30, 40, 50, 3])
    exp = np.array([32.0, 38.0, 53.0, 0.5])
    a = harness.chi_square(obs, exp, 25, constrained=True)
    b = harness.chi_square(obs, exp, 25, constrained=False)
    assert a["tested_bins"] == 3 and a["dof"] == 2 and b["dof"] == 3
    assert a["chi2"] == pytest.approx(4 / 32 + 4 / 38 + 9 / 53)
    with pytest.raises(ValueError):
        harness.chi_square(obs, exp, 1000, constrained=True)


def test_report_pass_is_function_of_stats():
    rep = ComparisonReport("x", {"a": 1}, {"p": 0.5, "z": 6.0}, {"p": ("p", ">", 0.001), "z": ("z", "<", 5.0)})
    assert rep.checks == {"p": True, "z": False} and not rep.passed
    assert rep.failed_checks() == ["z"]
    rep2 = ComparisonReport("x", {"a": 1}, {"p": 0.5, "z": 4.0}, rep.criteria)
    assert rep2.passed
    d = json.loads(rep.to_json())
    assert d["passed"] is False and d["criteria"]["z"] == ["z", "<", 5.0]
    nan = ComparisonReport("x", {}, {"p": float("nan")}, {"p": ("p", ">", 0.0)})
    assert not nan.passed


def test_json_has_17_digits():
    rep = ComparisonReport("x", {"v": 0.1}, {"s": 1 / 3}, {})
    assert "0.33333333333333331" in rep.to_json() and "0.10000000000000001" in rep.to_json()


def test_density_comparison_beta():
    params = EnsembleParams.equal(1, 1, 1)
    rep = harness.run_density_comparison(params, 100000, 20, RngStream(1))
    assert rep.passed, rep.statistics
    assert sum(b["observed"] for b in rep.bins) == 100000
    # equal-mass bins of a uniform |z|^2 law
    edges = np.array([b["bin_lo"] for b in rep.bins] + [1.0])
    assert np.allclose(edges ** 2, np.linspace(0, 1, 21), atol=1e-3)
    buf = io.StringIO()
    rep.write_histogram_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# params:") and "# seed: 1" in lines
    assert "bin_lo,bin_hi,observed,expected" in lines


def test_density_comparison_unequal_truncations():
    rep = harness.run_density_comparison(EnsembleParams(5, 3, (1, 2, 3)), 10000, 30, RngStream(2))
    assert rep.passed, rep.statistics
    assert rep.statistics["expected_sum_rel_err"] < 1e-6


def test_density_comparison_detects_wrong_model():
    # spectra from L = 3 tested against L = 2 must fail
    z = harness.draw_spectra(EnsembleParams.equal(20, 2, 3), 4000, RngStream(3))
    rep = harness.run_density_comparison(EnsembleParams.equal(20, 2, 2), 4000, 40, RngStream(3), spectra=z)
    assert not rep.passed


def test_reports_reproducible():
    params = EnsembleParams.equal(6, 2, 2)
    a = harness.run_density_comparison(params, 500, 10, RngStream(4), threads=1)
    b = harness.run_density_comparison(params, 500, 10, RngStream(4), threads=3)
    assert a.bins == b.bins and a.statistics == b.statistics
    with pytest.raises(ValueError):
        harness.run_density_comparison(params, 50, 10, RngStream(4))


def test_kostlan_comparison():
    rep = harness.run_kostlan_comparison(EnsembleParams.equal(20, 2, 3), 2000, RngStream(5))
    assert rep.passed, rep.statistics


def test_weak_effective_size():
    assert harness.weak_effective_size(EnsembleParams.equal(100, 2, 1)) == pytest.approx(100.5)
    assert harness.weak_effective_size(EnsembleParams(100, 2, (1, 3))) == pytest.approx(100 + 10 / 8)


def test_weak_profile_small_run():
    rep = harness.run_weak_profile(EnsembleParams.equal(100, 1, 1), 1000, RngStream(6))
    assert rep.passed, rep.statistics
    assert rep.statistics["negative_counts"] == 0


def test_interior_fraction_statistics():
    rng = np.random.default_rng(0)
    small = rng.uniform(0, 1, (400, 100)) * np.exp(1j)
    large = rng.uniform(0, 1, (400, 400)) * np.exp(1j)
    rep = harness.run_interior_fraction(small, large, 1, 1)
    f1 = np.mean(np.abs(small) <= (1 - 0.5 / 10) ** 0.5)
    assert rep.statistics["fraction_small"] == pytest.approx(f1)
    assert rep.statistics["predicted_ratio"] == pytest.approx((39 / 400) / (19 / 100))
    assert not rep.passed


def test_product_ginibre_cdf_against_gamma_products():
    n, m = 12, 2
    rng = np.random.default_rng(7)
    j = rng.integers(0, n, 200000)
    t = rng.gamma(j + 1) * rng.gamma(j + 1) / n ** 2
    y = np.sqrt(t)
    cdf = harness.product_ginibre_cdf(n, m)
    assert stats.kstest(y, cdf).pvalue > 0.01
    m1 = harness.product_ginibre_cdf(n, 1)
    assert m1(np.array([0.0, 50.0])).tolist() == [0.0, 1.0]


def test_product_ginibre_cdf_against_matrices():
    # eigenvalues of products of N x N Ginibre matrices with entry variance 1/N
    n, m, draws = 10, 2, 3000
    rng = np.random.default_rng(8)
    pick = []
    for _ in range(draws):
        g = [(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n) for _ in range(m)]
        ev = np.linalg.eigvals(g[1] @ g[0])
        pick.append(abs(ev[rng.integers(n)]) ** (2 / m))
    assert stats.kstest(pick, harness.product_ginibre_cdf(n, m)).pvalue > 0.01


def test_ginibre_crossover_records_deviation_at_small_ratio():
    rep = harness.run_ginibre_crossover(30, 2, 1, 1000, RngStream(9))
    assert rep.extra["regime_ok"] is False
    assert rep.statistics["ks_macro_p"] < 0.01 and not rep.passed
    with pytest.raises(ValueError):
        harness.run_ginibre_crossover(30, 20, 1, 10, RngStream(9), scaling="bad")
