"""Monte Carlo verification runs and machine-readable comparison reports.

Every run is a pure function of its parameters, the seed and the stream
layout.  Spectra are drawn on streams ``(seed, base + k)`` for consecutive
batches ``k`` of fixed size, so the thread count never changes a result.
Reports carry the raw statistics together with the thresholds, and the
pass flag is recomputed from them on demand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy import integrate, optimize, signal, special, stats

from . import asymptotics as asy
from ._io import dumps17
from .core import EnsembleParams, NumericalError
from .finite_kernel import build_kernel, density
from .sampler import (RngStream, map_streams, sample_radial_kostlan, sample_spectra,
                      stream_layout)

# stream ids above this offset are reserved for auxiliary draws (index selection)
AUX_STREAM_OFFSET = 2 ** 63


def load_defaults() -> dict:
    """Thresholds and run settings from the versioned package defaults file."""
    text = resources.files("truncprod.data").joinpath("defaults.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RadialHistogram:
    """Counts of a radial coordinate; merging is exact integer addition."""

    edges: np.ndarray
    counts: np.ndarray
    n_samples: int
    total_eigenvalues: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        if counts.shape != (edges.size - 1,):
            raise ValueError("need one count per bin")
        if np.any(counts < 0) or counts.sum() > self.total_eigenvalues:
            raise ValueError("counts must be non-negative and not exceed the eigenvalue total")

    @classmethod
    def from_values(cls, values: np.ndarray, edges: np.ndarray) -> "RadialHistogram":
        """``values`` has one row per sample."""
        values = np.atleast_2d(values)
        counts, _ = np.histogram(values.ravel(), bins=edges)
        return cls(edges, counts, values.shape[0], values.size)

    def merge(self, other: "RadialHistogram") -> "RadialHistogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        return RadialHistogram(self.edges, self.counts + other.counts,
                               self.n_samples + other.n_samples,
                               self.total_eigenvalues + other.total_eigenvalues)

    __add__ = merge


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of one verification run.

    ``statistics`` holds every number a check depends on; ``criteria``
    names each check as ``(statistic, relation, threshold)`` so that
    :attr:`passed` is a pure function of the stored values.
    """

    test_name: str
    parameters: dict
    statistics: dict
    criteria: dict
    bins: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def check(self, name: str) -> bool:
        stat, rel, thr = self.criteria[name]
        v = self.statistics[stat]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        return {"<": v < thr, "<=": v <= thr, ">": v > thr, ">=": v >= thr, "==": v == thr}[rel]

    @property
    def checks(self) -> dict[str, bool]:
        return {name: self.check(name) for name in self.criteria}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failed_checks(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]

    def to_dict(self) -> dict:
        return {"test_name": self.test_name, "parameters": self.parameters,
                "statistics": self.statistics,
                "criteria": {k: list(v) for k, v in self.criteria.items()},
                "checks": self.checks, "passed": self.passed,
                "bins": self.bins, "extra": self.extra}

    def to_json(self) -> str:
        return dumps17(self.to_dict())

    def write_histogram_csv(self, handle: TextIO) -> None:
        """``bin_lo, bin_hi, observed, expected`` behind a ``#`` header with parameters."""
        for k, v in self.parameters.items():
            handle.write(f"# {k}: {dumps17(v)}\n")
        handle.write("bin_lo,bin_hi,observed,expected\n")
        for b in self.bins:
            handle.write(f"{b['bin_lo']:.17g},{b['bin_hi']:.17g},{b['observed']},{b['expected']:.17g}\n")


def chi_square(observed: np.ndarray, expected: np.ndarray, min_expected: float,
               constrained: bool) -> dict:
    """Pearson chi-square over bins with at least ``min_expected`` counts.

    ``constrained`` removes one degree of freedom when the tested bins hold
    a fixed total.  Also returns the largest standardised residual.
    """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    tested = expected >= min_expected
    k = int(tested.sum())
    dof = k - 1 if constrained else k
    if dof < 1:
        raise ValueError("too few bins meet the minimum expected count")
    z = (observed[tested] - expected[tested]) / np.sqrt(expected[tested])
    chi2 = float(np.sum(z ** 2))
    rel = np.abs(observed[tested] / expected[tested] - 1)
    return {"chi2": chi2, "dof": dof, "chi2_p": float(stats.chi2.sf(chi2, dof)),
            "max_abs_z": float(np.max(np.abs(z))), "tested_bins": k,
            "max_abs_dev": float(np.max(np.abs(observed[tested] - expected[tested]))),
            "max_rel_dev": float(np.max(rel))}


def _bins_table(edges, observed, expected) -> list[dict]:
    return [{"bin_lo": float(lo), "bin_hi": float(hi), "observed": int(o), "expected": float(e)}
            for lo, hi, o, e in zip(edges[:-1], edges[1:], observed, expected)]


def _run_params(params: EnsembleParams, n_samples: int, rng: RngStream, threads: int,
                batch_size: int, **more) -> dict:
    out = {"params": params.as_dict(), "n_samples": n_samples, "seed": rng.seed,
           "stream_base": rng.stream_id, "batch_size": batch_size, "threads": threads}
    out.update(more)
    return out


def draw_spectra(params: EnsembleParams, n_samples: int, rng: RngStream, threads: int = 1,
                 batch_size: int | None = None) -> np.ndarray:
    """Spectra on streams ``(seed, (stream_id << 32) + k)``, one stream per batch."""
    if batch_size is None:
        batch_size = load_defaults()["batch_size"]
    base = rng.stream_id << 32

    def batch(sid, cnt):
        return sample_spectra(params, cnt, RngStream(rng.seed, base + sid))

    parts = map_streams(batch, stream_layout(n_samples, batch_size), threads)
    return np.concatenate(parts) if parts else np.empty((0, params.n), dtype=complex)


def _pick_one(values: np.ndarray, rng: RngStream, salt: int) -> np.ndarray:
    """One uniformly chosen entry per row; rows are independent so the picks are iid."""
    gen = RngStream(rng.seed, AUX_STREAM_OFFSET + (rng.stream_id << 8) + salt).generator()
    idx = gen.integers(0, values.shape[1], values.shape[0])
    return values[np.arange(values.shape[0]), idx]


# ---------------------------------------------------------------- finite-N density

def radial_mass(params: EnsembleParams, edges: np.ndarray, fk=None) -> np.ndarray:
    """Expected eigenvalues per sample in each annulus, ``2 pi int R_1(r) r dr``."""
    fk = fk or build_kernel(params)

    def f(r):
        return 2 * math.pi * r * density(fk, r)

    out = np.empty(len(edges) - 1)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        val, err = integrate.quad(f, lo, min(hi, 1.0), epsabs=1e-13, epsrel=1e-11, limit=200)
        if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise NumericalError(f"expected-mass quadrature failed on [{lo}, {hi}]")
        out[i] = val
    return out


def equal_mass_edges(params: EnsembleParams, bins: int, fk=None) -> np.ndarray:
    """Radii splitting the exact radial law into ``bins`` nearly equiprobable annuli."""
    grid = np.linspace(0.0, 1.0, 801)
    cum = np.concatenate(([0.0], np.cumsum(radial_mass(params, grid, fk)))) / params.n
    cum = np.maximum.accumulate(cum)
    cum[-1] = 1.0
    q = np.linspace(0.0, 1.0, bins + 1)
    edges = np.interp(q, cum, grid)
    edges[0], edges[-1] = 0.0, 1.0
    if np.any(np.diff(edges) <= 0):
        edges = np.linspace(0.0, 1.0, bins + 1)
    return edges


def run_density_comparison(params: EnsembleParams, n_samples: int, bins: int, rng: RngStream,
                           threads: int = 1, spectra: np.ndarray | None = None,
                           defaults: dict | None = None) -> ComparisonReport:
    """Chi-square of the radial eigenvalue histogram against the exact ``R_1``."""
    d = defaults or load_defaults()
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    fk = build_kernel(params)
    edges = equal_mass_edges(params, bins, fk)
    expected = radial_mass(params, edges, fk) * n_samples
    total = params.n * n_samples
    rel_sum = abs(expected.sum() / total - 1)
    if rel_sum > d["quad_sum_rel_tol"]:
        raise NumericalError(f"expected masses sum to {expected.sum()!r}, not {total}")
    if spectra is None:
        spectra = draw_spectra(params, n_samples, rng, threads, d["batch_size"])
    hist_edges = edges.copy()
    hist_edges[-1] = 1.0 + 1e-9
    hist = RadialHistogram.from_values(np.abs(spectra), hist_edges)
    st = chi_square(hist.counts, expected, d["min_expected"], constrained=True)
    st["expected_sum_rel_err"] = rel_sum
    st["outside_range"] = int(total - hist.counts.sum())
    return ComparisonReport(
        "density_comparison",
        _run_params(params, n_samples, rng, threads, d["batch_size"], bins=bins),
        st,
        {"chi2_p": ("chi2_p", ">", d["chi2_p_min"]),
         "max_abs_z": ("max_abs_z", "<", d["max_abs_z"]),
         "all_binned": ("outside_range", "==", 0)},
        _bins_table(edges, hist.counts, expected))


def run_kostlan_comparison(params: EnsembleParams, n_draws: int, rng: RngStream,
                           threads: int = 1, spectra: np.ndarray | None = None,
                           defaults: dict | None = None) -> ComparisonReport:
    """Two-sample KS between eigen-sampler and radial-sampler moduli.

    One uniformly chosen modulus per draw from each sampler, so both samples
    are iid.  The spectral radius is compared as well (diagnostic).
    """
    d = defaults or load_defaults()
    if spectra is None:
        spectra = draw_spectra(params, n_draws, rng, threads, d["batch_size"])
    kost_rng = RngStream(rng.seed, AUX_STREAM_OFFSET + (rng.stream_id << 8) + 255)
    radial = np.sqrt(sample_radial_kostlan(params, kost_rng, n_draws=n_draws))
    mod_eig = _pick_one(np.abs(spectra), rng, 1)
    mod_kost = _pick_one(radial, rng, 2)
    ks = stats.ks_2samp(mod_eig, mod_kost)
    ks_max = stats.ks_2samp(np.abs(spectra).max(axis=1), radial.max(axis=1))
    return ComparisonReport(
        "kostlan_comparison",
        _run_params(params, n_draws, rng, threads, d["batch_size"]),
        {"ks_stat": float(ks.statistic), "ks_p": float(ks.pvalue),
         "ks_max_stat": float(ks_max.statistic), "ks_max_p": float(ks_max.pvalue)},
        {"ks_p": ("ks_p", ">", d["ks_p_min"])})


# ---------------------------------------------------------------- edge profile

def _erfc_model(x, c1, c2, c3):
    return c1 * special.erfc(c2 * x + c3)


def run_edge_profile(params: EnsembleParams, n_samples: int, rng: RngStream,
                     threads: int = 1, spectra: np.ndarray | None = None,
                     defaults: dict | None = None) -> ComparisonReport:
    """Fit ``c1 erfc(c2 x + c3)`` to the edge density in ``x = sqrt(N)(|z| - mu**(M/2))``.

    The density is normalised like the edge kernel, eigenvalues per unit
    area divided by ``N``.  The fitted value at ``x = 0`` decides between
    the full-bulk amplitude ``rho_b`` and the half-bulk amplitude ``rho_b/2``.
    """
    d = defaults or load_defaults()
    if not params.equal_l:
        raise ValueError("the edge profile needs equal truncations")
    sp = asy.StrongLimitParams.from_ensemble(params)
    n, rho_b, c2p = params.n, sp.edge_bulk_density, sp.edge_slope
    sq = math.sqrt(n)
    rng_x = d["edge_range"] / c2p
    edges = np.linspace(-rng_x, rng_x, d["edge_bins"] + 1)
    # keep the inner edge at positive radius
    edges = edges[sp.radius + edges / sq > 0]
    if spectra is None:
        spectra = draw_spectra(params, n_samples, rng, threads, d["batch_size"])
    x = sq * (np.abs(spectra) - sp.radius)
    hist = RadialHistogram.from_values(x, edges)
    r = sp.radius + edges / sq
    area = math.pi * np.diff(r ** 2)
    norm = n_samples * n * area
    dens = hist.counts / norm
    sig = np.sqrt(np.maximum(hist.counts, 1)) / norm
    centres = 0.5 * (edges[:-1] + edges[1:])
    w0, w1 = d["edge_fit_window"]
    win = (centres >= w0 / c2p) & (centres <= w1 / c2p)
    try:
        popt, pcov = optimize.curve_fit(_erfc_model, centres[win], dens[win],
                                        p0=[rho_b / 2, c2p, 0.0], sigma=sig[win],
                                        absolute_sigma=True, maxfev=20000)
    except (RuntimeError, optimize.OptimizeWarning) as exc:
        raise NumericalError(f"edge fit did not converge: {exc}") from exc
    if not np.all(np.isfinite(pcov)):
        raise NumericalError("edge fit covariance is not finite")
    c1, c2, c3 = (float(v) for v in popt)
    edge_val = c1 * math.erfc(c3)
    grad = np.array([math.erfc(c3), 0.0, -c1 * 2 / math.sqrt(math.pi) * math.exp(-c3 * c3)])
    edge_sig = float(math.sqrt(grad @ pcov @ grad))
    resid = (dens[win] - _erfc_model(centres[win], *popt)) / sig[win]
    outside = int(hist.counts[edges[:-1] >= 5 / c2p].sum())
    inner = edges[1:] <= -5 / c2p
    if np.any(inner):
        lo, hi = r[:-1][inner][0], r[1:][inner][-1]
        macro, _ = integrate.quad(lambda t: 2 * math.pi * t * asy.macro_density(sp, t), lo, hi)
        plateau_obs = hist.counts[inner].sum() / (n_samples * n)
        plateau_dev = abs(plateau_obs / macro - 1)
    else:
        plateau_obs, macro, plateau_dev = float("nan"), float("nan"), float("nan")
    st = {
        "c1": c1, "c2": c2, "c3": c3,
        "c1_err": float(math.sqrt(pcov[0, 0])), "c2_err": float(math.sqrt(pcov[1, 1])),
        "c3_err": float(math.sqrt(pcov[2, 2])),
        "c2_rel_dev": abs(c2 / c2p - 1),
        "edge_value": edge_val, "edge_value_err": edge_sig,
        "z_full_bulk": (edge_val - rho_b) / edge_sig,
        "z_half_bulk": (edge_val - rho_b / 2) / edge_sig,
        "separation_sigma": (rho_b / 2) / edge_sig,
        "residual_rms": float(math.sqrt(np.mean(resid ** 2))),
        "outside_counts": outside,
        "plateau_observed": float(plateau_obs), "plateau_macro": float(macro),
        "plateau_rel_dev": float(plateau_dev),
    }
    decision = "half-bulk" if abs(st["z_half_bulk"]) < abs(st["z_full_bulk"]) else "full-bulk"
    expected = _erfc_model(centres, *popt) * norm
    return ComparisonReport(
        "edge_profile",
        _run_params(params, n_samples, rng, threads, d["batch_size"],
                    coordinate="sqrt(N) (|z| - mu**(M/2))"),
        st,
        {"slope": ("c2_rel_dev", "<", d["edge_slope_rel_tol"]),
         "amplitude_separation": ("separation_sigma", ">=", d["edge_separation_sigma"]),
         "residual_rms": ("residual_rms", "<", d["edge_residual_rms_max"]),
         "outside_empty": ("outside_counts", "==", 0),
         "plateau": ("plateau_rel_dev", "<", d["edge_plateau_rel_tol"])},
        _bins_table(edges, hist.counts, expected),
        {"decision": decision, "bulk_density": rho_b,
         "limit_prediction": {"c1": rho_b, "c2": c2p, "c3": 0.0},
         "half_bulk": {"c1": rho_b / 2, "c2": c2p, "c3": 0.0},
         "half_bulk_shifted": {"c1": rho_b, "c2": c2p, "c3": float(special.erfcinv(0.5))},
         "fit_window": [w0 / c2p, w1 / c2p]})


# ---------------------------------------------------------------- weak profile

def weak_effective_size(params: EnsembleParams) -> float:
    """``N + sum L_j**2 / (2 sum L_j)``: the size that removes the O(1/N) term.

    The coefficients ``prod_m C(L_m + j, j)`` behave like ``(j + c)**n / prod L_m!``
    with ``c = sum L_m (L_m + 1) / (2 n)``, ``n = sum L_m``; replacing the sum
    over ``j < N`` by an integral with the midpoint rule puts the upper
    limit at ``N + c - 1/2``.
    """
    truncs = params.truncations
    return params.n + sum(l * l for l in truncs) / (2 * sum(truncs))


def run_weak_profile(params: EnsembleParams, n_samples: int, rng: RngStream,
                     threads: int = 1, spectra: np.ndarray | None = None,
                     argument: str = "sum", defaults: dict | None = None) -> ComparisonReport:
    """Chi-square of ``x = -N' ln|z|`` against ``2 pi N' rho_weak(x)`` per unit ``x``.

    With ``u = 1 - du/N`` the kernel scales as ``N**2 K_weak`` and the
    annulus ``dx`` has area ``2 pi r dr = 2 pi r**2 dx / N'``, so the mean
    count per unit ``x`` is ``2 pi N' rho_weak(x)``.  Eigenvalues with
    ``x > weak_x_max`` fall in an untested overflow bin.
    """
    d = defaults or load_defaults()
    wp = asy.WeakLimitParams.from_ensemble(params)
    n_eff = weak_effective_size(params)
    edges = np.linspace(0.0, d["weak_x_max"], d["weak_bins"] + 1)
    if spectra is None:
        spectra = draw_spectra(params, n_samples, rng, threads, d["batch_size"])
    with np.errstate(divide="ignore"):
        x = -n_eff * np.log(np.abs(spectra))
    negative = int(np.sum(x < -1e-6))
    x = np.where((x < 0) & (x >= -1e-6), 0.0, x)
    hist = RadialHistogram.from_values(x, edges)
    mass = np.array([asy.weak_radial_mass(wp, lo, hi, argument)
                     for lo, hi in zip(edges[:-1], edges[1:])])
    expected = n_samples * n_eff * mass
    st = chi_square(hist.counts, expected, d["min_expected"], constrained=False)
    st["negative_counts"] = negative
    st["overflow_observed"] = int(spectra.size - hist.counts.sum() - negative)
    st["overflow_limit"] = float(n_samples * (params.n - n_eff * mass.sum()))
    return ComparisonReport(
        "weak_profile",
        _run_params(params, n_samples, rng, threads, d["batch_size"],
                    coordinate="-N' ln|z|", effective_size=n_eff, argument=argument),
        st,
        {"chi2_p": ("chi2_p", ">", d["chi2_p_min"]),
         "max_abs_z": ("max_abs_z", "<", d["max_abs_z"]),
         "outside_unit_disk": ("negative_counts", "==", 0)},
        _bins_table(edges, hist.counts, expected))


def interior_fraction(spectra: np.ndarray, m: int, c: float) -> tuple[float, float]:
    """Mean fraction of eigenvalues inside ``|z| <= (1 - c/sqrt(N))**(M/2)`` and its error.

    The error comes from the spread of per-sample fractions, which already
    includes the correlations between eigenvalues of one sample.
    """
    n = spectra.shape[1]
    radius = (1 - c / math.sqrt(n)) ** (m / 2)
    per = np.mean(np.abs(spectra) <= radius, axis=1)
    return float(per.mean()), float(per.std(ddof=1) / math.sqrt(per.size))


def run_interior_fraction(small: np.ndarray, large: np.ndarray, m: int, l_total: int,
                          params_info: dict | None = None,
                          defaults: dict | None = None) -> ComparisonReport:
    """Ratio of interior fractions between two sizes against ``p ~ (L/N)(sqrt(N)/c - 1)``."""
    d = defaults or load_defaults()
    c = d["interior_c"]
    n1, n2 = small.shape[1], large.shape[1]
    f1, s1 = interior_fraction(small, m, c)
    f2, s2 = interior_fraction(large, m, c)
    ratio = f2 / f1
    ratio_err = ratio * math.sqrt((s1 / f1) ** 2 + (s2 / f2) ** 2)

    def predicted(n):
        return l_total / m / n * (math.sqrt(n) / c - 1)

    pred_ratio = predicted(n2) / predicted(n1)
    st = {"fraction_small": f1, "fraction_small_err": s1,
          "fraction_large": f2, "fraction_large_err": s2,
          "ratio": ratio, "ratio_err": ratio_err, "predicted_ratio": pred_ratio,
          "z_predicted": abs(ratio - pred_ratio) / ratio_err,
          "z_half": abs(ratio - 0.5) / ratio_err,
          "asymptotic_ratio": math.sqrt(n1 / n2)}
    params = {"n_small": n1, "n_large": n2, "m": m, "c": c,
              "samples_small": small.shape[0], "samples_large": large.shape[0]}
    if params_info:
        params.update(params_info)
    return ComparisonReport(
        "interior_fraction", params, st,
        {"p0_ratio": ("z_predicted", "<", d["interior_sigma"])})


# ---------------------------------------------------------------- Ginibre limit

@lru_cache(maxsize=8)
def _product_gamma_tables(n: int, m: int, step: float = 0.002):
    """CDF of ``S = sum_k ln G_k`` for iid ``G_k ~ Gamma(j+1)``, every ``j < n``."""
    lo = -40.0
    hi = math.log(n + 10 * math.sqrt(n) + 40) + 1
    u = np.arange(lo, hi, step)
    cdfs = []
    for j in range(n):
        a = j + 1
        f = np.exp(a * u - np.exp(u) - math.lgamma(a))
        g = f
        for _ in range(m - 1):
            g = signal.fftconvolve(g, f)[: u.size * m] * step
        s = m * lo + step * np.arange(g.size)
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * step)))
        cdfs.append(cdf / cdf[-1])
    return s, np.mean(cdfs, axis=0)


def product_ginibre_cdf(n: int, m: int) -> Callable[[np.ndarray], np.ndarray]:
    """Distribution of ``y = |w|**(2/M)`` for a uniformly chosen eigenvalue of a
    product of ``M`` independent ``N x N`` Ginibre matrices with weight
    ``exp(-N tr Y^dagger Y)``.

    The squared moduli are products of independent ``Gamma(j+1)/N``
    variables; for ``M >= 2`` their logarithm is convolved on a fine grid.
    """
    if m == 1:
        js = np.arange(1, n + 1)
        return lambda y: np.mean(special.gammainc(js[None, :], n * np.asarray(y)[..., None]), axis=-1)
    s, cdf = _product_gamma_tables(n, m)
    log_y = (s - m * math.log(n)) / m

    def f(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.interp(np.log(y), log_y, cdf, left=0.0, right=1.0)

    return f


def run_ginibre_crossover(n: int, ratio: float, m: int, n_samples: int, rng: RngStream,
                          threads: int = 1, scaling: str = "mu", target: str = "finite",
                          spectra: np.ndarray | None = None,
                          defaults: dict | None = None) -> ComparisonReport:
    """KS test of rescaled spectra at ``L = ratio * N`` against the product-Ginibre law.

    ``scaling="mu"`` multiplies by ``mu**(-M/2) = ((N+L)/N)**(M/2)``, which
    matches the entry variance exactly; ``"ratio"`` uses ``(L/N)**(M/2)``.
    ``target="finite"`` compares with ``N x N`` Ginibre products,
    ``"macroscopic"`` with ``|w|**(2/M)`` uniform on ``[0, 1]``.  Both KS
    results are recorded; ``target`` selects the gating one.  One eigenvalue
    per sample is used so the KS sample is iid.
    """
    d = defaults or load_defaults()
    l = int(round(ratio * n))
    if l < 1:
        raise ValueError("ratio * n must be at least 1")
    params = EnsembleParams.equal(n, m, l)
    if spectra is None:
        spectra = draw_spectra(params, n_samples, rng, threads, d["batch_size"])
    factors = {"mu": ((n + l) / n) ** (m / 2), "ratio": (l / n) ** (m / 2)}
    if scaling not in factors:
        raise ValueError(f"unknown scaling {scaling!r}")
    if target not in ("finite", "macroscopic"):
        raise ValueError(f"unknown target {target!r}")
    y = (_pick_one(np.abs(spectra), rng, 3) * factors[scaling]) ** (2 / m)
    ks_fin = stats.kstest(y, product_ginibre_cdf(n, m))
    ks_mac = stats.kstest(y, stats.uniform(0, 1).cdf)
    st = {"ks_finite_stat": float(ks_fin.statistic), "ks_finite_p": float(ks_fin.pvalue),
          "ks_macro_stat": float(ks_mac.statistic), "ks_macro_p": float(ks_mac.pvalue)}
    gate = "ks_finite_p" if target == "finite" else "ks_macro_p"
    return ComparisonReport(
        "ginibre_crossover",
        _run_params(params, n_samples, rng, threads, d["batch_size"], ratio=ratio,
                    scaling=scaling, target=target),
        st, {"ks_p": (gate, ">", d["ks_p_min"])},
        extra={"regime_ok": ratio >= 10})


# ---------------------------------------------------------------- deterministic limits

def run_origin_convergence(m: int, sizes: Sequence[int] = (20, 40, 80),
                           points: Sequence[float] = (0.5, 1.0, 2.0),
                           final_tol: float = 0.03) -> ComparisonReport:
    """``L**-M R_1(L**(-M/2) dz)`` against the origin density at ``alpha = 1``."""
    errs = {}
    for n in sizes:
        fk = build_kernel(EnsembleParams.equal(n, m, n))
        errs[n] = [abs(n ** (-m) * density(fk, n ** (-m / 2) * dz) / asy.origin_density(m, dz) - 1)
                   for dz in points]
    table = np.array([errs[n] for n in sizes])
    monotone = bool(np.all(np.diff(table, axis=0) < 0))
    st = {"errors": table.tolist(), "monotone": int(monotone),
          "final_max_error": float(table[-1].max())}
    return ComparisonReport(
        "origin_convergence", {"m": m, "sizes": list(sizes), "points": list(points)}, st,
        {"monotone": ("monotone", "==", 1), "final_error": ("final_max_error", "<", final_tol)})


def run_bulk_universality(m: int, n: int = 100, positions: Sequence[float] = (0.3, 0.5, 0.7),
                          max_sep: float = 2.0, tol: float = 0.05,
                          convention: str = "reproducing") -> ComparisonReport:
    """``|K(u, v)|/N`` at ``L = N`` against the bulk-kernel modulus.

    Points are placed symmetrically, ``u, v = z +- i d/(2 sqrt N)`` with ``z``
    at the given fractions of the support radius, so that both sit at the
    same distance from the origin.  The error is taken relative to ``rho``,
    the scale of the kernel.
    """
    from .finite_kernel import kernel_eval

    params = EnsembleParams.equal(n, m, n)
    fk = build_kernel(params)
    sp = asy.StrongLimitParams.from_ensemble(params)
    seps = np.linspace(0.0, max_sep, 21)
    worst = 0.0
    rows = []
    for frac in positions:
        z = frac * sp.radius
        rho = asy.macro_density(sp, z)
        for dsep in seps:
            du, dv = 0.5j * dsep, -0.5j * dsep
            fin = abs(kernel_eval(fk, z + du / math.sqrt(n), z + dv / math.sqrt(n))) / n
            lim = abs(asy.bulk_kernel(sp, z, du, dv, convention=convention))
            err = abs(fin - lim) / rho
            worst = max(worst, err)
            rows.append({"z": z, "sep": float(dsep), "finite": fin, "limit": lim})
    return ComparisonReport(
        "bulk_universality", {"m": m, "n": n, "positions": list(positions),
                              "max_sep": max_sep, "convention": convention},
        {"max_error_over_rho": worst}, {"max_error": ("max_error_over_rho", "<", tol)},
        extra={"samples": rows})


def run_weak_bulk_crossover(m: int, sizes: Sequence[int] = (40, 80, 160), r0: float | None = None,
                            span: float = 2.0, argument: str = "sum") -> ComparisonReport:
    """``|K_weak(L r0 + sqrt(L) x, L r0 + sqrt(L) y)| / rho_weak(L r0)`` against
    ``exp(-(M / (8 r0**2)) |x - y|**2)``.

    ``r0`` defaults to ``M``; the Gaussian regime needs ``r0 > M/2`` so that
    the maximum of ``s**n exp(-t s)`` lies inside ``(0, 1)``.
    """
    r0 = float(m) if r0 is None else r0
    grid = np.linspace(-span, span, 5)
    devs = []
    for l in sizes:
        wp = asy.WeakLimitParams(m * l, m, m * math.lgamma(l + 1))
        c = l * r0
        dens = asy.weak_density(wp, c, argument)
        worst = 0.0
        for x in grid:
            for y in grid:
                for yy in (complex(y), complex(0, y)):
                    du = c + math.sqrt(l) * x
                    dv = c + math.sqrt(l) * yy
                    k = abs(asy.weak_kernel(wp, du, dv, argument)) / dens
                    g = math.exp(-m / (8 * r0 ** 2) * abs(x - yy) ** 2)
                    worst = max(worst, abs(k - g))
        devs.append(worst)
    decreasing = bool(np.all(np.diff(devs) < 0))
    return ComparisonReport(
        "weak_bulk_crossover", {"m": m, "sizes": list(sizes), "r0": r0, "span": span,
                                "argument": argument},
        {"max_deviation": devs, "decreasing": int(decreasing)},
        {"decreasing": ("decreasing", "==", 1)})


def with_thresholds(defaults: dict, **overrides) -> dict:
    """Copy of ``defaults`` with selected entries replaced."""
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise KeyError(f"unknown threshold(s): {sorted(unknown)}")
    out = dict(defaults)
    out.update(overrides)
    return out
