"""Finite-N determinantal structure: truncated series, kernel, correlations.

The kernel is ``K(u, v) = sqrt(w(u) w(v)) * T(u conj(v))`` with
``T(x) = sum_{j<N} b_j x**j`` and ``b_j = prod_m C(L_m + j, j) = 1/h_j``.
Everything is assembled in log space so that products with large ``N``,
``L`` and ``M`` neither overflow the series nor underflow the weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import EnsembleParams, SingularPointError, log_binom_products
from .weights import WeightFunction, build_weight

MAX_CORRELATION_ORDER = 12


@dataclass(frozen=True)
class FiniteKernel:
    params: EnsembleParams
    weight: WeightFunction = field(repr=False)
    log_b: np.ndarray = field(repr=False)

    def __call__(self, u, v):
        return kernel_eval(self, u, v)


def build_kernel(params: EnsembleParams, weight: WeightFunction | None = None) -> FiniteKernel:
    if weight is None:
        weight = build_weight(params)
    log_b = log_binom_products(params.truncations, params.n)
    log_b.setflags(write=False)
    return FiniteKernel(params, weight, log_b)


@dataclass(frozen=True)
class CorrelationRequest:
    points: tuple[complex, ...]

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("need at least one point")
        if any(abs(p) >= 1 for p in pts):
            raise ValueError("all points must lie in the open unit disk")
        if len(pts) > MAX_CORRELATION_ORDER:
            raise ValueError(f"k is capped at {MAX_CORRELATION_ORDER}")


def _scaled_series(log_b: np.ndarray, x: np.ndarray):
    """Return ``(log_scale, reduced)`` with ``T(x) = exp(log_scale) * reduced``.

    Each term is divided by the largest term modulus before summing, so
    every summand has modulus at most one.
    """
    x = np.asarray(x, dtype=complex)
    j = np.arange(log_b.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = np.log(np.abs(x))[..., None]
        log_terms = log_b + j * log_abs
    log_terms = np.where(np.isneginf(log_abs), np.where(j == 0, 0.0, -np.inf), log_terms)
    log_scale = log_terms.max(axis=-1)
    phase = np.exp(1j * j * np.angle(x)[..., None])
    reduced = np.sum(np.exp(log_terms - log_scale[..., None]) * phase, axis=-1)
    return log_scale, reduced


def truncated_series(fk: FiniteKernel, upper: int, x: complex) -> complex:
    """``sum_{j=0}^{upper} b_j x**j`` with compensated summation of the scaled terms."""
    if not 0 <= upper <= fk.params.n - 1:
        raise ValueError(f"upper must lie in [0, {fk.params.n - 1}]")
    log_b = fk.log_b[: upper + 1]
    x = complex(x)
    if x == 0:
        return 1.0 + 0j
    j = np.arange(upper + 1)
    log_terms = log_b + j * math.log(abs(x))
    scale = float(log_terms.max())
    mags = np.exp(log_terms - scale)
    ang = j * math.atan2(x.imag, x.real)
    re = math.fsum(mags * np.cos(ang))
    im = math.fsum(mags * np.sin(ang))
    return math.exp(scale) * complex(re, im)


def _log_weight(fk: FiniteKernel, z: np.ndarray) -> np.ndarray:
    x = np.abs(z) ** 2
    out = np.full(x.shape, -np.inf)
    inside = x < 1
    if np.any(inside & (x == 0)):
        if fk.params.m >= 2:
            raise SingularPointError("the weight is log-singular at the origin for M >= 2")
        out[inside & (x == 0)] = math.log(fk.params.truncations[0])
    pos = inside & (x > 0)
    if np.any(pos):
        out[pos] = fk.weight.log_value(x[pos])
    return out - math.log(math.pi)


def kernel_eval(fk: FiniteKernel, u, v):
    """``K(u, v) = sqrt(w(u) w(v)) T(u conj v)``; vectorised over broadcastable inputs."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    u, v = np.broadcast_arrays(u, v)
    scalar = u.ndim == 0
    u, v = np.atleast_1d(u), np.atleast_1d(v)
    lw = 0.5 * (_log_weight(fk, u) + _log_weight(fk, v))
    log_scale, reduced = _scaled_series(fk.log_b, u * np.conj(v))
    with np.errstate(invalid="ignore"):
        out = np.where(np.isneginf(lw), 0.0, np.exp(lw + log_scale) * reduced)
    return complex(out[0]) if scalar else out


def density(fk: FiniteKernel, z):
    """Level density ``R_1(z) = w(|z|) T(|z|**2)``."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(np.abs(z)).astype(complex)
    lw = _log_weight(fk, z)
    log_scale, reduced = _scaled_series(fk.log_b, np.abs(z) ** 2)
    out = np.where(np.isneginf(lw), 0.0, np.exp(lw + log_scale) * reduced.real)
    return float(out[0]) if scalar else out


def log_density_radial(fk: FiniteKernel, r: np.ndarray) -> np.ndarray:
    """``ln R_1`` at radii ``r``; cheaper than ``density`` when only moduli matter."""
    r = np.asarray(r, dtype=float)
    lw = _log_weight(fk, r.astype(complex))
    log_scale, reduced = _scaled_series(fk.log_b, r ** 2)
    with np.errstate(divide="ignore"):
        return lw + log_scale + np.log(reduced.real)


def kernel_matrix(fk: FiniteKernel, points: Sequence[complex]) -> np.ndarray:
    z = np.asarray(points, dtype=complex)
    return kernel_eval(fk, z[:, None], z[None, :])


def _log_gram_det(fk: FiniteKernel, points: Sequence[complex]) -> float:
    """``ln det[K(z_a, z_b)]`` through the rank-N factorisation ``K = A A^*``.

    ``A[a, j] = sqrt(w(z_a) b_j) z_a**j``; with ``A^* = Q R`` the determinant
    is ``prod |R_ii|**2``, which avoids squaring the condition number of ``A``.
    Rows are scaled to unit maximum before the factorisation.
    """
    z = np.asarray(points, dtype=complex)
    lw = _log_weight(fk, z)
    if np.any(np.isneginf(lw)):
        return -math.inf
    j = np.arange(fk.params.n)
    with np.errstate(divide="ignore"):
        log_mod = 0.5 * (lw[:, None] + fk.log_b[None, :]) + j[None, :] * np.log(np.abs(z))[:, None]
    log_mod[:, 0] = 0.5 * (lw + fk.log_b[0])
    row_max = log_mod.max(axis=1)
    a = np.exp(log_mod - row_max[:, None]) * np.exp(1j * j[None, :] * np.angle(z)[:, None])
    r = np.linalg.qr(a.conj().T, mode="r")
    diag = np.abs(np.diag(r))
    if np.any(diag == 0):
        return -math.inf
    return float(2 * (row_max.sum() + np.log(diag).sum()))


def correlation_k(fk: FiniteKernel, req: CorrelationRequest) -> float:
    """k-point correlation ``det[K(z_a, z_b)]``."""
    if len(req.points) > fk.params.n:
        raise ValueError("k cannot exceed N")
    return math.exp(_log_gram_det(fk, req.points))


def log_joint_density(fk: FiniteKernel, points: Sequence[complex]) -> float:
    """``ln(N! P(z_1..z_N))`` from the product form (weights times Vandermonde squared).

    Test oracle for the determinantal representation; never used to sample.
    """
    z = np.asarray(points, dtype=complex)
    if z.size != fk.params.n:
        raise ValueError("need exactly N points")
    log_w = _log_weight(fk, z).sum()
    diffs = np.abs(z[:, None] - z[None, :])[np.triu_indices(z.size, 1)]
    return float(log_w + 2 * np.log(diffs).sum() + fk.log_b.sum())
