"""Ensemble parameters and log-space combinatorics shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class SingularPointError(ValueError):
    """Raised when a quantity is requested at a point where it diverges."""


class NumericalError(RuntimeError):
    """A quadrature, fit or tabulation failed to reach its tolerance."""


@dataclass(frozen=True)
class EnsembleParams:
    """Product of ``m`` truncated Haar unitaries, each cut from size ``n + L_j`` to ``n``.

    Parameters
    ----------
    n : int
        Size of the truncated matrices.
    m : int
        Number of factors in the product.
    truncations : tuple of int
        ``(L_1, ..., L_m)``; every entry must be at least 1.
    """

    n: int
    m: int
    truncations: tuple[int, ...] = field(default=())

    def __post_init__(self):
        truncs = tuple(int(l) for l in self.truncations)
        object.__setattr__(self, "truncations", truncs)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if len(truncs) != self.m:
            raise ValueError(f"need {self.m} truncations, got {len(truncs)}")
        if any(l < 1 for l in truncs):
            raise ValueError(f"every truncation L_j must be >= 1, got {truncs}")

    @classmethod
    def equal(cls, n: int, m: int, l: int) -> "EnsembleParams":
        return cls(n, m, (l,) * m)

    @classmethod
    def from_truncations(cls, n: int, m: int, l: int | Sequence[int]) -> "EnsembleParams":
        """Build from a scalar ``l`` (equal truncations) or an explicit sequence."""
        if isinstance(l, (int, np.integer)):
            return cls.equal(n, m, int(l))
        return cls(n, m, tuple(l))

    @property
    def equal_l(self) -> bool:
        return len(set(self.truncations)) == 1

    @property
    def l(self) -> int:
        """The common truncation; only defined for equal truncations."""
        if not self.equal_l:
            raise ValueError("l is only defined for equal truncations")
        return self.truncations[0]

    def mu(self) -> float:
        """N / (N + L); radius of the limiting support is ``mu ** (M/2)``."""
        return self.n / (self.n + self.l)

    def alpha(self) -> float:
        return self.l / self.n

    def as_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "truncations": list(self.truncations)}


def log_binom(top: int, bottom: int) -> float:
    """Natural log of the binomial coefficient C(top, bottom)."""
    if bottom < 0 or top < 0:
        raise ValueError("arguments must be non-negative")
    if bottom > top:
        raise ValueError(f"bottom={bottom} exceeds top={top}")
    if bottom == 0 or bottom == top:
        return 0.0
    return math.lgamma(top + 1) - math.lgamma(bottom + 1) - math.lgamma(top - bottom + 1)


def log_binom_products(truncations: Sequence[int], count: int) -> np.ndarray:
    """``out[j] = sum_m ln C(L_m + j, j)`` for ``j = 0 .. count-1``.

    Built by cumulative sums of ``ln((L + j) / j)`` so that consecutive
    entries are exact increments of each other.
    """
    j = np.arange(1, count, dtype=float)
    out = np.zeros(count)
    for l in truncations:
        out[1:] += np.cumsum(np.log1p(l / j))
    return out


def h_moment(params: EnsembleParams, j: int) -> float:
    """Squared norm of the monomial ``z**j``: ``prod_m C(L_m + j, j) ** -1``."""
    if j < 0:
        raise ValueError("j must be non-negative")
    return math.exp(-sum(log_binom(l + j, j) for l in params.truncations))
