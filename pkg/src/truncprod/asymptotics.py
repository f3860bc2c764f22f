"""Large-N limits: macroscopic density and the bulk, edge, origin and weak kernels.

Strong non-unitarity keeps ``mu = N/(N+L)`` fixed; the spectrum fills a disk
of radius ``mu**(M/2)``.  Weak non-unitarity keeps ``L`` fixed and zooms into
a strip of width ``1/N`` inside the unit circle.  All kernels are returned
without their antisymmetric phase factors, which drop out of every
correlation determinant; the phases are available separately.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .core import EnsembleParams, SingularPointError
from .special import erfc_complex, hyper_0fm, log_d_n, log_meijer_g_0m


@dataclass(frozen=True)
class StrongLimitParams:
    mu: float
    m: int

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if self.m < 1:
            raise ValueError("m must be a positive integer")

    @classmethod
    def from_ensemble(cls, params: EnsembleParams) -> "StrongLimitParams":
        return cls(params.mu(), params.m)

    @property
    def alpha(self) -> float:
        return (1 - self.mu) / self.mu

    @property
    def radius(self) -> float:
        return self.mu ** (self.m / 2)

    @property
    def edge_bulk_density(self) -> float:
        """Macroscopic density at the edge, ``mu**-M / (pi M (1 - mu))``."""
        return self.mu ** -self.m / (math.pi * self.m * (1 - self.mu))

    @property
    def edge_slope(self) -> float:
        """Coefficient of the scaled displacement inside the edge erfc."""
        return math.sqrt(2 * self.mu ** -self.m / (self.m * (1 - self.mu)))


@dataclass(frozen=True)
class WeakLimitParams:
    """``l_total`` is ``sum_j L_j``; the factorial product cancels in the kernel."""

    l_total: int
    m: int
    log_l_factorial_product: float

    def __post_init__(self):
        if self.l_total < self.m:
            raise ValueError("each truncation must be at least 1 (l_total >= m)")

    @classmethod
    def from_ensemble(cls, params: EnsembleParams) -> "WeakLimitParams":
        return cls(sum(params.truncations), params.m,
                   sum(math.lgamma(l + 1) for l in params.truncations))


@dataclass(frozen=True)
class PhaseValue:
    phi: float


def macro_density(p: StrongLimitParams, z) -> float:
    """``alpha/(pi M) |z|**(2(1-M)/M) / (1 - |z|**(2/M))**2`` on the disk of radius ``mu**(M/2)``.

    Returns ``inf`` at the origin for ``M >= 2``.
    """
    r = abs(complex(z))
    if r >= p.radius:
        return 0.0
    if r == 0:
        return math.inf if p.m >= 2 else p.alpha / math.pi
    r2m = r ** (2 / p.m)
    return p.alpha / (math.pi * p.m) * r ** (2 * (1 - p.m) / p.m) / (1 - r2m) ** 2


def macro_radial_cdf(p: StrongLimitParams, r: float) -> float:
    """Fraction of eigenvalues with modulus below ``r`` under the macroscopic law."""
    x = min(max(r, 0.0), p.radius) ** (2 / p.m)
    return p.alpha * x / (1 - x)


def flat_density_map(p: StrongLimitParams, z) -> tuple[complex, float]:
    """Map ``z`` to the ring ``sqrt(1-mu) <= |zhat| <= 1`` where the density is ``1/(pi mu)``."""
    z = complex(z)
    r = abs(z)
    if not 0 < r < p.radius:
        raise ValueError("z must lie strictly inside the support, away from the origin")
    rho = math.sqrt((1 - p.mu) / (1 - r ** (2 / p.m)))
    assert math.sqrt(1 - p.mu) <= rho <= 1 + 1e-15
    return rho * z / r, 1.0 / (math.pi * p.mu)


def bulk_phase(p: StrongLimitParams, z, du, dv, n: int) -> PhaseValue:
    """Antisymmetric phase of the bulk kernel; grows like ``sqrt(N)``."""
    z, du, dv = complex(z), complex(du), complex(dv)
    l = p.alpha * n
    r = abs(z)
    r2m = r ** (2 / p.m)
    first = l * r ** (2 * (1 - p.m) / p.m) / (math.sqrt(n) * (1 - r2m)) * ((du - dv) * z.conjugate()).imag
    second = (l * r ** (2 * (1 - 2 * p.m) / p.m) / (2 * n * (1 - r2m))
              * (1 - 1 / (p.m * (1 - r2m)))
              * ((du * du - dv * dv) * z.conjugate() ** 2).imag)
    return PhaseValue(first - second)


def bulk_kernel(p: StrongLimitParams, z, du, dv, include_phase: bool = False,
                n: int | None = None, convention: str = "reproducing"):
    """Ginibre-type bulk kernel at the point ``z`` of the support, phase omitted.

    ``convention="reproducing"`` returns
    ``rho exp[-pi rho (|du|^2/2 + |dv|^2/2 - du conj(dv))]``, the unique
    Gaussian kernel with density ``rho`` that reproduces itself, so that
    ``|K| = rho exp(-pi rho |du - dv|^2 / 2)``.  ``convention="doubled"``
    doubles the exponent, giving ``|K| = rho exp(-pi rho |du - dv|^2)``;
    that form is kept for comparison and is not a projection kernel.

    With ``include_phase`` the finite-``N`` phase is computed as well and
    ``(kernel, PhaseValue)`` is returned; the kernel itself stays phase-free.
    """
    z = complex(z)
    if not 0 < abs(z) < p.radius:
        raise ValueError("z must lie in the bulk of the support")
    if convention == "reproducing":
        scale = math.pi
    elif convention == "doubled":
        scale = 2 * math.pi
    else:
        raise ValueError(f"unknown convention {convention!r}")
    du, dv = complex(du), complex(dv)
    rho = macro_density(p, z)
    k = rho * cmath.exp(-scale * rho * (abs(du) ** 2 / 2 + abs(dv) ** 2 / 2 - du * dv.conjugate()))
    if include_phase:
        if n is None:
            raise ValueError("the bulk phase needs the finite N")
        return k, bulk_phase(p, z, du, dv, n)
    return k


def edge_phase(p: StrongLimitParams, du, dv, n: int) -> PhaseValue:
    du, dv = complex(du), complex(dv)
    first = math.sqrt(n) * p.mu ** (-p.m / 2) * (du - dv).imag
    second = (p.mu ** -p.m * (1 - p.m + p.mu * p.m) / (2 * p.m * (1 - p.mu))
              * (du * du - dv * dv).imag)
    return PhaseValue(first + second)


def edge_kernel(p: StrongLimitParams, du, dv) -> complex:
    """Edge kernel at the point ``mu**(M/2)`` of the support, phase omitted."""
    du, dv = complex(du), complex(dv)
    c = p.mu ** -p.m / (2 * p.m * (1 - p.mu))
    gauss = cmath.exp(-c * (abs(du) ** 2 + abs(dv) ** 2 - 2 * du * dv.conjugate()))
    arg = p.mu ** (-p.m / 2) * (du + dv.conjugate()) / math.sqrt(2 * p.m * (1 - p.mu))
    return p.edge_bulk_density * gauss * erfc_complex(arg)


def edge_density(p: StrongLimitParams, x, convention: str = "diagonal") -> float:
    """Edge density ``rho_b erfc(slope * d)``; ``x`` is the outward displacement.

    ``convention="diagonal"`` uses ``d = Re x`` (the kernel at coincident
    points); ``"modulus"`` uses ``d = |x|``. They agree for real ``x >= 0``.
    """
    x = complex(x)
    if convention == "diagonal":
        d = x.real
    elif convention == "modulus":
        d = abs(x)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return p.edge_bulk_density * float(erfc_complex(p.edge_slope * d).real)


def origin_kernel(m: int, du, dv) -> complex:
    """Kernel at the origin: ``(1/pi) sqrt(G(|du|^2) G(|dv|^2)) 0F_{M-1}(du conj dv)``."""
    du, dv = complex(du), complex(dv)
    if m >= 2 and (du == 0 or dv == 0):
        raise SingularPointError("the origin kernel is log-singular at zero for M >= 2")
    if m == 1:
        return cmath.exp(-abs(du) ** 2 / 2 - abs(dv) ** 2 / 2 + du * dv.conjugate()) / math.pi
    log_g = 0.5 * (log_meijer_g_0m(m, abs(du) ** 2) + log_meijer_g_0m(m, abs(dv) ** 2))
    return math.exp(log_g) * hyper_0fm(m, du * dv.conjugate()) / math.pi


def origin_density(m: int, dz) -> float:
    return origin_kernel(m, dz, dz).real


def _weak_t(p: WeakLimitParams, du: complex, dv: complex, argument: str) -> complex:
    s = du + dv.conjugate()
    if argument == "sum":
        return s
    if argument == "mean":
        return s / p.m
    raise ValueError(f"unknown argument convention {argument!r}")


def weak_kernel(p: WeakLimitParams, du, dv, argument: str = "sum") -> complex:
    """Weak non-unitarity kernel ``lim K/N**2`` near ``z = 1`` with ``u = 1 - du/N``.

    ``D_n`` with ``n = sum L_j`` is evaluated at ``t = du + conj(dv)``
    (``argument="sum"``), which is where the M-fold derivative lands once
    every ``t_j = (du + conj dv)/M`` is summed.  ``argument="mean"``
    evaluates at ``t/M`` instead; that reading is not normalised for
    ``M >= 2`` and is kept for comparison only.
    """
    du, dv = complex(du), complex(dv)
    if du.real < 0 or dv.real < 0:
        return 0j
    n = p.l_total
    t = _weak_t(p, du, dv, argument)
    prod = 4 * du.real * dv.real
    if prod == 0:
        # on the unit circle only n = 1 survives: (2x)**0 = 1
        if n > 1:
            return 0j
        return cmath.exp(log_d_n(1, t)) / math.pi
    log_k = ((n - 1) / 2 * math.log(prod) - math.lgamma(n)
             + log_d_n(n, t) - math.log(math.pi))
    return cmath.exp(log_k)


def weak_density(p: WeakLimitParams, du, argument: str = "sum") -> float:
    """``(2x)**(n-1) D_n(2x) / (pi (n-1)!)`` at ``x = Re du`` (or ``D_n(2x/M)`` for ``"mean"``)."""
    return weak_kernel(p, du, du, argument).real


def weak_radial_mass(p: WeakLimitParams, x_lo: float, x_hi: float, argument: str = "sum") -> float:
    """``2 pi int weak_density dx`` over ``[x_lo, x_hi]``: expected fraction of eigenvalues.

    With ``u = r e^{i theta}`` and ``x = N(1 - r)`` the area element is
    ``r dr dtheta = r dx dtheta / N`` and ``R_1 = N**2 rho_weak``, so the
    mean number of eigenvalues per unit ``x`` is ``2 pi N rho_weak(x)`` up
    to ``O(1/N)``; dividing by ``N`` gives the fraction.
    """
    from scipy import integrate

    val, _ = integrate.quad(lambda x: weak_density(p, x, argument), max(x_lo, 0.0), x_hi,
                            epsabs=1e-13, epsrel=1e-11, limit=200)
    return 2 * math.pi * val
