"""One-point weight of the product ensemble.

The eigenvalue weight is ``w(z) = Omega(|z|**2) / pi`` where ``Omega`` is the
density of a product of independent ``Beta(1, L_j)`` variables. For finite
truncations ``Omega`` is a finite sum ``sum c[l, m] x**l ln(x)**m`` obtained
from the residues of

    prod_j L_j!  x**u / prod_j prod_{k<L_j} (k - u)

at ``u = 0, 1, ..., max(L_j) - 1``.  Two independent routes are provided
as cross-checks: a Mellin-Barnes contour integral and the multiplicative
convolution recursion.
"""

from __future__ import annotations

import decimal
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import digamma, loggamma, polygamma

from . import _mellin
from .core import EnsembleParams, NumericalError, SingularPointError

# Above this coefficient magnitude the residue table loses too many digits
# to cancellation and evaluation goes through the Mellin inversion instead.
TABLE_MAX_COEFF = 1e9
# Coefficients grow like binomials in L; beyond this the table is never built.
TABLE_MAX_L = 40
# rounding-error multiple below which a longdouble sum is re-evaluated in decimal
CANCEL_FACTOR = 1e3
DECIMAL_DIGITS = 50


def mellin_m1(s: float, l: int) -> float:
    """Mellin transform ``Gamma(s) Gamma(L+1) / Gamma(s+L)`` of the single-factor weight."""
    if s <= 0:
        raise ValueError(f"Mellin transform has a pole for s <= 0 (s={s})")
    return math.exp(math.lgamma(s) + math.lgamma(l + 1) - math.lgamma(s + l))


def _jet_mul(a: list, b: list, order: int) -> list:
    out = [Fraction(0)] * order
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for k in range(order - i):
            out[i + k] += ai * b[k]
    return out


def _inv_linear_jet(a: int, order: int) -> list:
    # 1/(a - eps) = sum_n eps**n / a**(n+1)
    return [Fraction(1, a ** (n + 1)) if a > 0 else Fraction((-1) ** (n + 1), (-a) ** (n + 1))
            for n in range(order)]


def _residue_table(truncations: tuple[int, ...]) -> dict[tuple[int, int], Fraction]:
    prefactor = math.prod(math.factorial(l) for l in truncations)
    table = {}
    for pole in range(max(truncations)):
        mult = sum(1 for l in truncations if l > pole)
        # cofactor g(eps) = 1 / prod_{(j,k), k != pole} (k - pole - eps)
        jet = [Fraction(1)] + [Fraction(0)] * (mult - 1)
        for l in truncations:
            for k in range(l):
                if k != pole:
                    jet = _jet_mul(jet, _inv_linear_jet(k - pole, mult), mult)
        # Omega = -sum of residues (contour closed clockwise to the right);
        # the pole factor prod (-eps) contributes (-1)**mult.
        sign = -1 if mult % 2 == 0 else 1
        for m in range(mult):
            c = sign * prefactor * jet[mult - 1 - m] / math.factorial(m)
            if c != 0:
                table[(pole, m)] = c
    return table


def term_integral(l: int, m: int) -> float:
    """``int_0^1 x**l ln(x)**m dx = (-1)**m m! / (l+1)**(m+1)``."""
    return (-1) ** m * math.factorial(m) / (l + 1) ** (m + 1)


@dataclass(frozen=True)
class WeightFunction:
    """Tabulated ``Omega(x) = sum c[l, m] x**l ln(x)**m`` on ``(0, 1]``.

    ``coeffs`` holds floats; ``exact`` keeps the rational values the floats
    were rounded from. Both are built on first use.
    """

    params: EnsembleParams

    @cached_property
    def exact(self) -> dict[tuple[int, int], Fraction]:
        if max(self.params.truncations) > TABLE_MAX_L:
            raise NumericalError(
                f"residue table not built for truncations above {TABLE_MAX_L}; "
                "use log_value, which switches to Mellin inversion")
        return _residue_table(self.params.truncations)

    @cached_property
    def coeffs(self) -> dict[tuple[int, int], float]:
        return {k: float(v) for k, v in self.exact.items()}

    @cached_property
    def pole_orders(self) -> dict[int, int]:
        truncs = self.params.truncations
        return {l: sum(1 for lj in truncs if lj > l) for l in range(max(truncs))}

    @cached_property
    def _arrays(self):
        # extended precision halves the digits lost to cancellation between terms
        keys = sorted(self.exact)
        ls = np.array([k[0] for k in keys], dtype=np.longdouble)
        ms = np.array([k[1] for k in keys], dtype=int)
        cs = np.array([np.longdouble(str(self.exact[k].numerator))
                       / np.longdouble(str(self.exact[k].denominator)) for k in keys])
        return ls, ms, cs

    @property
    def max_abs_coeff(self) -> float:
        return float(max(abs(c) for c in self.exact.values()))

    @cached_property
    def table_is_stable(self) -> bool:
        if max(self.params.truncations) > TABLE_MAX_L:
            return False
        return max(abs(c) for c in self.exact.values()) <= TABLE_MAX_COEFF

    def __call__(self, x):
        return weight_eval(self, x)

    def integral(self, power: int = 0) -> float:
        """``int_0^1 Omega(x) x**power dx`` from the closed-form term integrals."""
        if self.table_is_stable or max(self.params.truncations) <= TABLE_MAX_L:
            # exact rational sum; float terms cancel badly for large M and L
            return float(sum(c * Fraction((-1) ** m * math.factorial(m), (l + power + 1) ** (m + 1))
                             for (l, m), c in self.exact.items()))
        return math.fsum(c * term_integral(l + power, m) for (l, m), c in self.coeffs.items())

    def cdf_power(self, power: int, x: np.ndarray) -> np.ndarray:
        """``int_0^x Omega(t) t**power dt`` term by term (exact antiderivatives)."""
        if not self.table_is_stable:
            raise NumericalError("antiderivatives need a stable residue table")
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
            for (l, m), c in self.coeffs.items():
                a1 = l + power + 1
                acc = np.zeros_like(x)
                for k in range(m + 1):
                    acc += ((-1) ** k * math.factorial(m) / math.factorial(m - k)
                            * lx ** (m - k) / a1 ** (k + 1))
                out += c * np.where(x > 0, x ** a1 * acc, 0.0)
        return out

    def log_value(self, x):
        """``ln Omega(x)`` robust for large truncations; ``-inf`` outside the support."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.full(x.shape, -np.inf)
        inside = (x > 0) & (x <= 1)
        if np.any(x <= 0):
            raise SingularPointError("log weight requested at x <= 0")
        if self.params.m == 1:
            l = self.params.truncations[0]
            with np.errstate(divide="ignore"):
                tail = (l - 1) * np.log1p(-x[inside]) if l > 1 else 0.0
                out[inside] = math.log(l) + tail
        elif self.table_is_stable:
            with np.errstate(divide="ignore"):
                vals = weight_eval(self, x[inside])
                out[inside] = np.log(np.maximum(vals, 0.0))
        else:
            for i in np.flatnonzero(inside & (x < 1)):
                out[i] = log_weight_mellin(self.params, float(x[i]))
        return float(out[0]) if scalar else out

    def to_json(self) -> str:
        terms = [{"l": l, "m": m, "c": c} for (l, m), c in sorted(self.coeffs.items())]
        return json.dumps({"params": self.params.as_dict(), "terms": terms}, indent=2)


def build_weight(params: EnsembleParams) -> WeightFunction:
    """Residue table of ``Omega`` for arbitrary truncations ``L_1..L_M``."""
    return WeightFunction(params)


def weight_eval(w: WeightFunction, x):
    """Evaluate ``Omega(x)``: zero for ``x > 1``, ``inf`` at a divergent origin.

    Raises ``ValueError`` for negative ``x``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("Omega is defined for x >= 0 only")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ls, ms, cs = w._arrays
    out = np.zeros(x.shape)
    inside = (x > 0) & (x <= 1)
    xi = x[inside].astype(np.longdouble)[:, None]
    lx = np.log(xi)
    terms = cs * xi ** ls * lx ** ms
    vals = np.sum(terms, axis=1)
    # near x = 1 the terms cancel to (1-x)**(sum L - 1); redo those points in decimal
    bound = CANCEL_FACTOR * np.finfo(np.longdouble).eps * np.sum(np.abs(terms), axis=1)
    idx = np.flatnonzero(inside)
    for k in np.flatnonzero(np.abs(vals) <= bound):
        vals[k] = _decimal_eval(w, float(x[idx[k]]))
    out[inside] = vals.astype(float)
    at0 = x == 0
    if np.any(at0):
        log_terms = [c for (l, m), c in w.coeffs.items() if l == 0 and m > 0]
        if log_terms:
            # leading ln(x)**(M-1) term decides the sign of the divergence
            mmax = max(m for (l, m) in w.coeffs if l == 0)
            lead = w.coeffs[(0, mmax)] * (-1) ** mmax
            out[at0] = math.copysign(math.inf, lead)
        else:
            out[at0] = w.coeffs.get((0, 0), 0.0)
    return float(out[0]) if scalar else out


def _decimal_eval(w: WeightFunction, x: float) -> float:
    """``Omega(x)`` in 50-digit decimal arithmetic from the exact table."""
    with decimal.localcontext() as ctx:
        ctx.prec = DECIMAL_DIGITS
        dx = decimal.Decimal(x)
        lx = dx.ln()
        acc = decimal.Decimal(0)
        for (l, m), c in w.exact.items():
            acc += decimal.Decimal(c.numerator) / decimal.Decimal(c.denominator) * dx ** l * (lx ** m if m else 1)
        return float(acc)


def _log_m1_sum(truncations, s):
    acc = 0.0
    for l in truncations:
        acc = acc + loggamma(s) + math.lgamma(l + 1) - loggamma(s + l)
    return acc


def log_weight_mellin(params: EnsembleParams, x: float) -> float:
    """``ln Omega(x)`` by Mellin inversion of ``prod_j M1(s; L_j)`` through its saddle.

    Stable for large truncations where the residue table cancels
    catastrophically; slow for very small total truncation near ``x = 1``.
    """
    if not 0 < x < 1:
        raise ValueError("x must lie in (0, 1)")
    truncs = params.truncations
    lx = math.log(x)

    def dlog(s):
        return sum(float(digamma(s) - digamma(s + l)) for l in truncs) - lx

    s0 = _mellin.find_saddle(dlog)
    curv = sum(float(_trigamma(s0) - _trigamma(s0 + l)) for l in truncs)
    scale = min(s0, 1.0 / math.sqrt(curv))

    def log_integrand(s):
        return _log_m1_sum(truncs, s) - s * lx

    return _mellin.log_inverse_mellin(log_integrand, s0, scale)


def _trigamma(s):
    return polygamma(1, s)


def weight_eval_mellin_barnes(params: EnsembleParams, x: float, h: float = 0.02) -> float:
    """``Omega(x)`` from the Mellin-Barnes integral, independent of the residue table.

    With ``s = -u`` the integral is a Bromwich inversion of
    ``F(s) = prod_j L_j! / prod_k (k + s)`` at ``tau = -ln x``. The vertical
    line through ``s = 1/2`` is bent into the hyperbola
    ``s(v) = mu (1 + sin(i v - a))`` crossing the real axis at ``s = 1/2``
    so that ``exp(s tau)`` decays along both branches; all poles stay to
    the left. The trapezoid rule in ``v`` then converges geometrically.
    """
    if not 0 < x < 1:
        raise ValueError("x must lie in (0, 1)")
    tau = -math.log(x)
    a = math.pi / 4
    mu = 0.5 / (1 - math.sin(a))
    # truncate where exp(tau Re s) < 1e-18 relative to the crossing point
    need = (41.5 + 0.5 * tau) / tau
    vmax = math.acosh(max((need + mu) / (mu * math.sin(a)), 1.0)) + 1.0
    truncs = params.truncations
    log_pref = sum(math.lgamma(l + 1) for l in truncs)

    def quad(step):
        v = np.arange(-vmax, vmax + step / 2, step)
        s = mu * (1 + np.sin(1j * v - a))
        ds = 1j * mu * np.cos(1j * v - a)
        logf = log_pref + s * tau
        for l in truncs:
            for k in range(l):
                logf = logf - np.log(k + s)
        return float(np.real(step * np.sum(np.exp(logf) * ds) / (2j * math.pi)))

    coarse, fine = quad(2 * h), quad(h)
    if abs(coarse - fine) > 1e-9 * max(1.0, abs(fine)):
        raise NumericalError(
            f"Mellin-Barnes quadrature not converged at x={x}: {coarse!r} vs {fine!r}")
    return fine


def weight_convolve_check(params: EnsembleParams, x: float) -> float:
    """``Omega_M(x) = int_x^1 Omega_1(x/y; L_M) Omega_{M-1}(y) dy/y`` by adaptive quadrature."""
    if params.m < 2:
        raise ValueError("the convolution recursion needs M >= 2")
    if not 0 < x < 1:
        raise ValueError("x must lie in (0, 1)")
    inner_params = EnsembleParams(params.n, params.m - 1, params.truncations[:-1])
    l_last = params.truncations[-1]
    if inner_params.m == 1:
        l0 = inner_params.truncations[0]

        def inner(y):
            return l0 * (1.0 - y) ** (l0 - 1)
    else:
        inner_w = build_weight(inner_params)

        def inner(y):
            return math.exp(inner_w.log_value(y)) if y < 1 else float(weight_eval(inner_w, y))

    def integrand(y):
        return l_last * (1.0 - x / y) ** (l_last - 1) * inner(y) / y

    # the substitution y = exp(-v) removes the 1/y scale change near small x
    val, err = integrate.quad(lambda v: integrand(math.exp(-v)) * math.exp(-v),
                              0.0, -math.log(x), epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-9 * max(1.0, abs(val)):
        raise NumericalError(f"convolution quadrature error estimate {err:g} too large")
    return val
