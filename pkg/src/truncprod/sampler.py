"""Monte Carlo sampling of products of truncated Haar unitaries.

Two samplers are provided: the direct one multiplies truncated Haar
matrices and diagonalises the product, and the radial one draws the
squared moduli as independent variables with densities
``Omega(t) t**j / h_j`` (rotation invariance plus monomial orthogonal
polynomials make the squared moduli independent).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, TextIO

import numpy as np

from .core import EnsembleParams, NumericalError, log_binom_products
from .weights import build_weight

CONTRACTION_TOL = 1e-10
KOSTLAN_GRID = 4096
MAX_RESAMPLES = 10


@dataclass(frozen=True)
class RngStream:
    """Independent random stream keyed by ``(seed, stream_id)``.

    Each call to :meth:`generator` returns a fresh generator in the same
    initial state, so a stream is reproducible regardless of scheduling.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v < 2 ** 64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or a numpy Generator")


def _complex_gaussian(gen: np.random.Generator, shape) -> np.ndarray:
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2)


def _phase_fixed_q(a: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    ph = np.where(d == 0, 1.0, d / np.abs(d))
    return q * ph[None, :]


def haar_unitary(dim: int, rng) -> np.ndarray:
    """Haar-distributed ``dim x dim`` unitary: QR of a complex Ginibre matrix
    with each column of ``Q`` multiplied by the phase of the matching diagonal
    entry of ``R``."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    gen = _as_generator(rng)
    return _phase_fixed_q(_complex_gaussian(gen, (dim, dim)))


def truncated_haar(n: int, l: int, gen: np.random.Generator) -> np.ndarray:
    """Top-left ``n x n`` block of a Haar unitary of size ``n + l``.

    Only the first ``n`` columns are generated: the phase-fixed thin QR of an
    ``(n + l) x n`` Gaussian is exactly distributed as those columns.
    """
    return _phase_fixed_q(_complex_gaussian(gen, (n + l, n)))[:n]


@dataclass(frozen=True)
class SpectrumSample:
    eigenvalues: np.ndarray = field(repr=False)
    params: EnsembleParams
    seed: int
    stream_id: int
    resamples: int = 0


def _sort_spectrum(z: np.ndarray) -> np.ndarray:
    # modulus rounded to absorb eigensolver jitter, then phase
    order = np.lexsort((np.angle(z), np.round(np.abs(z), 12)))
    return z[order]


def _draw_spectrum(params: EnsembleParams, gen: np.random.Generator) -> tuple[np.ndarray, int]:
    for attempt in range(MAX_RESAMPLES):
        prod = None
        for l in params.truncations:
            x = truncated_haar(params.n, l, gen)
            prod = x if prod is None else x @ prod
        try:
            z = np.linalg.eigvals(prod)
        except np.linalg.LinAlgError:
            continue
        if np.max(np.abs(z)) > 1 + CONTRACTION_TOL:
            raise NumericalError(f"eigenvalue of modulus {np.max(np.abs(z))!r} exceeds the contraction bound")
        return _sort_spectrum(z), attempt
    raise NumericalError(f"eigensolver failed {MAX_RESAMPLES} times in a row")


def sample_product_spectrum(params: EnsembleParams, rng: RngStream) -> SpectrumSample:
    """One spectrum of ``X_M ... X_1``, each ``X_j`` a truncated Haar unitary."""
    z, resamples = _draw_spectrum(params, rng.generator())
    return SpectrumSample(z, params, rng.seed, rng.stream_id, resamples)


def sample_spectra(params: EnsembleParams, n_samples: int, rng: RngStream) -> np.ndarray:
    """``n_samples`` spectra from one stream as an ``(n_samples, N)`` array."""
    gen = rng.generator()
    out = np.empty((n_samples, params.n), dtype=complex)
    for i in range(n_samples):
        out[i], _ = _draw_spectrum(params, gen)
    return out


@lru_cache(maxsize=16)
def _kostlan_tables(params: EnsembleParams) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF tables ``(cdf[j], t_grid)`` for ``t_j ~ Omega(t) t**j / h_j``."""
    w = build_weight(params)
    if not w.table_is_stable:
        raise NumericalError("radial sampler needs a stable residue table (small truncations)")
    # log-spaced towards both ends: Omega is log-singular at 0 and the
    # high-j densities pile up against 1
    half = KOSTLAN_GRID // 2
    lower = np.logspace(-16, math.log10(0.5), half - 1)
    upper = 1 - np.logspace(math.log10(0.5), -15, half)[1:]
    t = np.concatenate(([0.0], lower, upper, [1.0]))
    log_h = -log_binom_products(params.truncations, params.n)
    cdf = np.empty((params.n, t.size))
    eps = np.finfo(float).eps
    for j in range(params.n):
        scale = math.exp(-log_h[j])
        row = w.cdf_power(j, t) * scale
        # rounding floor of the term-by-term antiderivative
        tol = 64 * eps * scale * sum(abs(c) / (l + j + 1) for (l, _), c in w.coeffs.items())
        if np.any(np.diff(row) < -tol) or abs(row[-1] - 1) > max(tol, 1e-12):
            raise NumericalError(f"CDF table for j={j} is not monotone or not normalised")
        row = np.maximum.accumulate(np.clip(row, 0.0, 1.0))
        row[-1] = 1.0
        cdf[j] = row
    cdf.setflags(write=False)
    t.setflags(write=False)
    return cdf, t


def sample_radial_kostlan(params: EnsembleParams, rng, n_draws: int | None = None) -> np.ndarray:
    """Squared moduli ``t_0..t_{N-1}``, one independent draw per ``j``.

    With ``n_draws`` an ``(n_draws, N)`` array of repetitions is returned.
    """
    cdf, t = _kostlan_tables(params)
    gen = _as_generator(rng)
    reps = 1 if n_draws is None else n_draws
    u = gen.random((reps, params.n))
    out = np.empty_like(u)
    for j in range(params.n):
        out[:, j] = np.interp(u[:, j], cdf[j], t)
    return out[0] if n_draws is None else out


def stream_layout(n_samples: int, batch_size: int) -> list[tuple[int, int]]:
    """``(stream_id, count)`` pairs; fixed by the batch size, never by the thread count."""
    if n_samples < 0 or batch_size < 1:
        raise ValueError("need n_samples >= 0 and batch_size >= 1")
    full, rest = divmod(n_samples, batch_size)
    layout = [(k, batch_size) for k in range(full)]
    if rest:
        layout.append((full, rest))
    return layout


def map_streams(fn: Callable[[int, int], object], layout: Iterable[tuple[int, int]],
                threads: int = 1) -> list:
    """Apply ``fn(stream_id, count)`` over the layout, in layout order."""
    layout = list(layout)
    if threads <= 1 or len(layout) <= 1:
        return [fn(sid, cnt) for sid, cnt in layout]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda sc: fn(*sc), layout))


def sample_spectra_parallel(params: EnsembleParams, n_samples: int, seed: int,
                            threads: int = 1, batch_size: int = 256) -> np.ndarray:
    """Spectra from consecutive streams ``0, 1, ...``; identical for any ``threads``."""
    parts = map_streams(lambda sid, cnt: sample_spectra(params, cnt, RngStream(seed, sid)),
                        stream_layout(n_samples, batch_size), threads)
    return np.concatenate(parts) if parts else np.empty((0, params.n), dtype=complex)


def write_samples_csv(handle: TextIO, spectra: np.ndarray, params: EnsembleParams,
                      seed: int, n_streams: int, extra_header: dict | None = None) -> None:
    """CSV with columns ``re, im, sample_index`` behind a ``#`` header block."""
    header = {"params": params.as_dict(), "seed": seed, "streams": n_streams}
    if extra_header:
        header.update(extra_header)
    for k, v in header.items():
        handle.write(f"# {k}: {json.dumps(v)}\n")
    handle.write("re,im,sample_index\n")
    for i, row in enumerate(spectra):
        for z in row:
            handle.write(f"{z.real:.17g},{z.imag:.17g},{i}\n")
