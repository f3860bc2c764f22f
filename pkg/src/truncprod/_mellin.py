"""Inverse Mellin transforms on a vertical line through the real saddle point.

For a Mellin transform ``F(s)`` that is log-convex on the positive axis the
integrand ``F(s) x**-s`` restricted to the real axis has a single minimum
``s0``; on the vertical line ``Re s = s0`` the modulus peaks at ``t = 0``.
Integrating there avoids the huge cancellations of a fixed contour when
``F`` varies over many orders of magnitude.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .core import NumericalError

ComplexFn = Callable[[np.ndarray], np.ndarray]


def find_saddle(dlog: Callable[[float], float], lo: float = 1e-14, hi: float = 1.0) -> float:
    """Root of the increasing function ``dlog`` on ``(0, inf)``."""
    if dlog(lo) > 0:
        return lo
    while dlog(hi) < 0:
        hi *= 4.0
        if hi > 1e12:
            raise NumericalError("saddle point search diverged")
    return brentq(dlog, lo, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=500)


def log_inverse_mellin(log_integrand: ComplexFn, s0: float, scale: float,
                       rel_tol: float = 1e-10) -> float:
    """``log`` of ``(1/2 pi i) * int exp(log_integrand(s)) ds`` along ``Re s = s0``.

    ``log_integrand`` must satisfy ``f(conj s) = conj f(s)`` so that the
    integral is real. ``scale`` sets the grid spacing near ``t = 0``; the
    substitution ``t = scale * sinh(y)`` then resolves both the peak and
    the algebraic tail with one trapezoid rule.
    """
    peak = float(np.real(log_integrand(np.array([complex(s0, 0.0)]))[0]))
    # round-off in loggamma grows with the size of its argument
    rel_tol = max(rel_tol, 1e-14 * s0)
    prev = None
    h = 0.1
    # loggamma differences lose digits beyond |t| ~ 1e12
    ymax = math.asinh(1e12 / scale)
    for _ in range(6):
        y = np.arange(0.0, ymax, h)
        t = scale * np.sinh(y)
        jac = scale * np.cosh(y)
        vals = np.real(np.exp(log_integrand(s0 + 1j * t) - peak)) * jac
        mag = np.abs(vals)
        tail = np.flatnonzero(mag > 1e-18 * mag.max())
        if tail[-1] >= len(y) - 3:
            raise NumericalError("integrand has not decayed within |t| < 1e12; "
                                 "use the residue route for small truncations")
        vals = vals[:tail[-1] + 2]
        total = h * (0.5 * vals[0] + vals[1:].sum())
        if prev is not None and abs(total - prev) <= rel_tol * abs(total):
            break
        prev = total
        h *= 0.5
    else:
        raise NumericalError(
            f"inverse Mellin quadrature did not converge (last two: {prev!r}, {total!r})")
    value = total / math.pi
    if value <= 0:
        raise NumericalError(f"inverse Mellin quadrature returned non-positive value {value!r}")
    return peak + math.log(value)
