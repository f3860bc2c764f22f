import math

import numpy as np
import pytest
from scipy import integrate, special

from truncprod.core import EnsembleParams, SingularPointError, h_moment
from truncprod.finite_kernel import (CorrelationRequest, build_kernel, correlation_k, density,
                                     kernel_eval, log_joint_density, truncated_series)
from truncprod.weights import build_weight, weight_eval


def _disk_points(rng, k, rmin=0.05, rmax=0.95):
    r = np.sqrt(rng.uniform(rmin ** 2, rmax ** 2, k))
    return r * np.exp(2j * np.pi * rng.random(k))


def test_coefficients():
    fk = build_kernel(EnsembleParams(12, 3, (1, 4, 2)))
    assert fk.log_b[0] == 0
    assert np.all(np.diff(fk.log_b) > 0)
    for j in range(12):
        assert math.exp(-fk.log_b[j]) == pytest.approx(h_moment(fk.params, j), rel=1e-12)


def test_truncated_series_examples():
    fk = build_kernel(EnsembleParams.equal(5, 2, 3))
    assert truncated_series(fk, 0, 0.7 - 0.2j) == 1
    assert truncated_series(build_kernel(EnsembleParams.equal(2, 1, 1)), 1, 0.5) == pytest.approx(2.0, abs=1e-15)
    assert truncated_series(build_kernel(EnsembleParams.equal(3, 2, 1)), 2, 1.0) == pytest.approx(14.0, abs=1e-13)
    with pytest.raises(ValueError):
        truncated_series(fk, 5, 0.1)


def test_truncated_series_hypergeometric_integral():
    # T(x) as the phase average of 2F1(L+1, L+1; 1; rho e^{-i phi}) times a geometric sum;
    # rho < 1 keeps the hypergeometric inside its disk of convergence
    n, l, rho = 8, 2, 0.5
    fk = build_kernel(EnsembleParams.equal(n + 1, 2, l))
    phi = 2 * np.pi * np.arange(512) / 512
    for x in (0.3, 0.8 * np.exp(0.4j), -0.6j):
        y = x * np.exp(1j * phi) / rho
        f = special.hyp2f1(l + 1, l + 1, 1, rho * np.exp(-1j * phi))
        val = np.mean(f * (1 - y ** (n + 1)) / (1 - y))
        assert val == pytest.approx(truncated_series(fk, n, x), rel=1e-11)


def test_kernel_examples():
    assert kernel_eval(build_kernel(EnsembleParams.equal(1, 1, 3)), 0, 0).real == pytest.approx(3 / math.pi, rel=1e-14)
    assert kernel_eval(build_kernel(EnsembleParams.equal(2, 1, 1)), 0.5, 0.5).real == pytest.approx(1.5 / math.pi, rel=1e-14)
    with pytest.raises(SingularPointError):
        kernel_eval(build_kernel(EnsembleParams.equal(3, 2, 2)), 0, 0.3)


def test_kernel_matches_direct_sum(rng):
    params = EnsembleParams(7, 2, (3, 1))
    fk = build_kernel(params)
    w = build_weight(params)
    for u, v in zip(_disk_points(rng, 20), _disk_points(rng, 20)):
        t = sum(math.comb(3 + j, j) * math.comb(1 + j, j) * (u * np.conj(v)) ** j for j in range(7))
        ref = math.sqrt(weight_eval(w, abs(u) ** 2) * weight_eval(w, abs(v) ** 2)) / math.pi * t
        assert kernel_eval(fk, u, v) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("params", [EnsembleParams.equal(10, 1, 2), EnsembleParams.equal(15, 3, 2),
                                    EnsembleParams(9, 2, (1, 5))])
def test_hermitian_and_positive(params, rng):
    fk = build_kernel(params)
    u, v = _disk_points(rng, 100), _disk_points(rng, 100)
    k_uv = kernel_eval(fk, u, v)
    k_vu = kernel_eval(fk, v, u)
    assert np.allclose(k_uv, np.conj(k_vu), rtol=1e-13, atol=0)
    r2 = density(fk, u) * density(fk, v) - np.abs(k_uv) ** 2
    assert np.all(r2 >= -1e-10)


def test_density_examples():
    assert density(build_kernel(EnsembleParams.equal(1, 1, 2)), 0) == pytest.approx(2 / math.pi, rel=1e-14)
    fk = build_kernel(EnsembleParams.equal(6, 2, 3))
    assert density(fk, 1 - 1e-12) < 1e-20
    assert density(fk, 1.0) == 0.0


def test_density_rotation_invariant(rng):
    fk = build_kernel(EnsembleParams.equal(12, 2, 2))
    r = rng.uniform(0.05, 0.95, 50)
    rot = r * np.exp(2j * np.pi * rng.random(50))
    assert np.allclose(density(fk, rot), density(fk, r), rtol=1e-13, atol=0)


def test_density_normalisation():
    for params in (EnsembleParams.equal(5, 2, 2), EnsembleParams.equal(20, 1, 3), EnsembleParams(5, 3, (1, 2, 3))):
        fk = build_kernel(params)
        val, _ = integrate.quad(lambda r: 2 * math.pi * r * density(fk, r), 0, 1, epsabs=1e-12, limit=200)
        assert val == pytest.approx(params.n, rel=1e-6)


def test_correlation_examples():
    fk = build_kernel(EnsembleParams.equal(6, 2, 2))
    assert abs(correlation_k(fk, CorrelationRequest((0.3, 0.3)))) < 1e-12
    z1, z2 = 0.2, 0.5j
    ref = density(fk, z1) * density(fk, z2) - abs(kernel_eval(fk, z1, z2)) ** 2
    assert correlation_k(fk, CorrelationRequest((z1, z2))) == pytest.approx(ref, rel=1e-12)
    assert correlation_k(fk, CorrelationRequest((0.4 - 0.1j,))) == pytest.approx(density(fk, 0.4 - 0.1j), rel=1e-14)
    with pytest.raises(ValueError):
        CorrelationRequest((1.2,))
    with pytest.raises(ValueError):
        CorrelationRequest(tuple(0.1 * np.arange(13) / 13))


@pytest.mark.parametrize("params", [EnsembleParams.equal(n, m, l) for n, m, l in
                                    [(2, 1, 1), (3, 2, 2), (4, 3, 1), (5, 2, 3), (6, 1, 4), (6, 2, 1)]]
                         + [EnsembleParams(5, 3, (1, 2, 3))], ids=str)
def test_determinant_equals_joint_density(params, rng):
    fk = build_kernel(params)
    w = build_weight(params)
    h = [h_moment(params, j) for j in range(params.n)]
    for _ in range(50):
        z = _disk_points(rng, params.n, 0.1, 0.9)
        vdm = np.prod([abs(z[a] - z[b]) ** 2 for a in range(params.n) for b in range(a)])
        joint = np.prod(weight_eval(w, np.abs(z) ** 2) / math.pi) * vdm / np.prod(h)
        assert correlation_k(fk, CorrelationRequest(tuple(z))) == pytest.approx(joint, rel=1e-9)
        assert math.exp(log_joint_density(fk, z)) == pytest.approx(joint, rel=1e-9)
