"""Exact and asymptotic eigenvalue statistics of products of truncated Haar unitaries."""

from .core import EnsembleParams, NumericalError, SingularPointError, h_moment, log_binom
from .finite_kernel import build_kernel, correlation_k, density, kernel_eval
from .sampler import RngStream, sample_product_spectrum, sample_radial_kostlan
from .weights import build_weight, weight_eval

__all__ = [
    "EnsembleParams", "NumericalError", "SingularPointError", "h_moment", "log_binom",
    "build_kernel", "correlation_k", "density", "kernel_eval",
    "RngStream", "sample_product_spectrum", "sample_radial_kostlan",
    "build_weight", "weight_eval",
]

__version__ = "0.1.0"
