import math

import pytest
from hypothesis import given, strategies as st

from truncprod.core import EnsembleParams, h_moment, log_binom, log_binom_products


def test_log_binom_examples():
    assert log_binom(3, 2) == pytest.approx(math.log(3), rel=1e-15)
    assert all(log_binom(j, 0) == 0 for j in range(50))
    # exact big-integer oracle
    assert log_binom(200, 100) == pytest.approx(math.log(math.comb(200, 100)), abs=1e-9)


def test_log_binom_domain():
    with pytest.raises(ValueError):
        log_binom(2, 3)


@given(st.integers(0, 40), st.integers(0, 40))
def test_log_binom_matches_exact_integers(a, b):
    top, bottom = max(a, b), min(a, b)
    if top > 40:
        return
    assert math.exp(log_binom(top, bottom)) == pytest.approx(math.comb(top, bottom), rel=1e-12)


def test_h_moment_examples():
    assert h_moment(EnsembleParams.equal(1, 2, 2), 1) == pytest.approx(1 / 9, rel=1e-14)
    assert h_moment(EnsembleParams(1, 2, (1, 2)), 1) == pytest.approx(1 / 6, rel=1e-14)
    assert h_moment(EnsembleParams(1, 3, (4, 1, 7)), 0) == 1.0


@given(st.lists(st.integers(1, 30), min_size=1, max_size=4))
def test_h_moment_strictly_decreasing(ls):
    p = EnsembleParams(1, len(ls), tuple(ls))
    vals = [h_moment(p, j) for j in range(20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_log_binom_products_matches_h():
    p = EnsembleParams(30, 3, (2, 5, 1))
    lb = log_binom_products(p.truncations, p.n)
    assert lb[0] == 0
    for j in (0, 5, 29):
        assert math.exp(-lb[j]) == pytest.approx(h_moment(p, j), rel=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        EnsembleParams(5, 1, (0,))
    with pytest.raises(ValueError):
        EnsembleParams(0, 1, (1,))
    with pytest.raises(ValueError):
        EnsembleParams(5, 2, (1,))
    p = EnsembleParams.equal(20, 2, 3)
    assert p.equal_l and p.mu() == pytest.approx(20 / 23) and p.alpha() == pytest.approx(0.15)
    with pytest.raises(ValueError):
        EnsembleParams(5, 2, (1, 2)).mu()
