"""Special functions needed by the limiting kernels."""

from __future__ import annotations

import cmath
import math
import warnings

import numpy as np
from scipy import integrate, special

from . import _mellin
from .core import NumericalError

ERFC_IMAG_LIMIT = 30.0


def erfc_complex(z):
    """Complementary error function for complex argument with ``|Im z| <= 30``.

    Backed by the Faddeeva-function implementation in ``scipy.special``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) > ERFC_IMAG_LIMIT):
        raise ValueError(f"erfc_complex is only validated for |Im z| <= {ERFC_IMAG_LIMIT}")
    out = special.erfc(z)
    return complex(out) if out.ndim == 0 else out


def hyper_0fm(m: int, x):
    """``sum_j x**j / (j!)**m``, i.e. 0F_{m-1}(; 1, ..., 1; x), for ``|x| <= 100``."""
    x = np.asarray(x, dtype=complex)
    if np.any(np.abs(x) > 100):
        raise ValueError("hyper_0fm is implemented in the series regime |x| <= 100")
    term = np.ones_like(x)
    total = np.ones_like(x)
    j = 0
    while True:
        j += 1
        term = term * x / float(j) ** m
        total = total + term
        if np.all(np.abs(term) <= 1e-16 * np.abs(total)) and j > 2:
            break
    return complex(total) if total.ndim == 0 else total


def meijer_g_0m(m: int, x: float) -> float:
    """``G^{m,0}_{0,m}(x | 0, ..., 0) = (1/2 pi i) int Gamma(s)**m x**-s ds``.

    The contour is the vertical line through the real saddle of
    ``Gamma(s)**m x**-s`` (``m psi(s0) = ln x``), where the integrand does
    not oscillate near its peak; ``|Gamma(s0 + it)|`` then decays like
    ``exp(-m pi |t| / 2)``.
    """
    if x <= 0:
        raise ValueError("meijer_g_0m needs x > 0")
    return math.exp(log_meijer_g_0m(m, x))


def log_meijer_g_0m(m: int, x: float) -> float:
    if x <= 0:
        raise ValueError("meijer_g_0m needs x > 0")
    if m == 1:
        return -x
    lx = math.log(x)
    s0 = _mellin.find_saddle(lambda s: m * float(special.digamma(s)) - lx)
    scale = min(s0, 1.0 / math.sqrt(m * float(special.polygamma(1, s0))))
    return _mellin.log_inverse_mellin(lambda s: m * special.loggamma(s) - s * lx, s0, scale,
                                      rel_tol=1e-13)


def _kummer_log_d(n: int, t: complex) -> complex:
    # D_n(t) = exp(-t) / (n+1) * sum_i t**i / ((n+2) ... (n+1+i))
    term = 1.0 + 0j
    total = 1.0 + 0j
    log_offset = 0.0
    i = 0
    while True:
        term *= t / (n + 2 + i)
        total += term
        i += 1
        if abs(total) > 1e250:
            total /= 1e250
            term /= 1e250
            log_offset += math.log(1e250)
        if abs(term) <= 1e-17 * abs(total) and i > t.real - n:
            break
        if i > 100000:
            raise NumericalError("D_n series did not converge")
    return -t - math.log(n + 1) + log_offset + cmath.log(total)


def _closed_log_d(n: int, t: complex) -> complex:
    # D_n(t) = n!/t**(n+1) - exp(-t) sum_k n!/(k! t**(n+1-k)), all terms small
    log_lead = math.lgamma(n + 1) - (n + 1) * cmath.log(t)
    k_terms = 0j
    for k in range(n + 1):
        k_terms += cmath.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - (n + 1 - k) * cmath.log(t) - t)
    return cmath.log(cmath.exp(log_lead) - k_terms) if abs(t) < 700 else log_lead


def _quad_log_d(n: int, t: complex) -> complex:
    opts = dict(limit=400, epsabs=0.0, epsrel=1e-12)
    with warnings.catch_warnings():
        # quad flags round-off at 1e-12 requested accuracy; results hold to ~1e-13
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, _ = integrate.quad(lambda s: (s ** n * cmath.exp(-t * s)).real, 0.0, 1.0, **opts)
        im, _ = integrate.quad(lambda s: (s ** n * cmath.exp(-t * s)).imag, 0.0, 1.0, **opts)
    return cmath.log(complex(re, im))


def log_d_n(n: int, t: complex) -> complex:
    """Complex log of ``D_n(t) = (-d/dt)**n [(1 - exp(-t))/t] = int_0^1 s**n exp(-t s) ds``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    t = complex(t)
    if abs(t) - t.real <= 7.0:
        return _kummer_log_d(n, t)
    if abs(t) > 2 * n + 40:
        return _closed_log_d(n, t)
    return _quad_log_d(n, t)


def d_n(n: int, t):
    """``D_n(t)``; equals ``gamma(n+1, t) / t**(n+1)`` with the lower incomplete gamma."""
    t_arr = np.asarray(t, dtype=complex)
    out = np.vectorize(lambda tt: cmath.exp(log_d_n(n, tt)), otypes=[complex])(t_arr)
    if np.all(t_arr.imag == 0):
        out = out.real
    return out.item() if out.ndim == 0 else out
