import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmlas.analysis import critical_load, q_function, q_inverse, single_bit_bound


def test_known_values(oracle):
    assert q_function(0.0) == 0.5
    assert q_function(1.0) == pytest.approx(oracle["Q1"], rel=1e-12)
    assert q_function(2.0) == pytest.approx(oracle["Q2"], rel=1e-12)
    assert q_function(5.0) == pytest.approx(oracle["Q5"], rel=1e-12)
    assert q_function(-1.0) == pytest.approx(1.0 - oracle["Q1"], rel=1e-12)


def test_vectorized():
    x = np.array([0.0, 1.0, -1.0])
    out = q_function(x)
    assert out.shape == (3,)
    assert out[1] + out[2] == pytest.approx(1.0)


@given(st.floats(0.0, 6.0))
def test_inverse_round_trip(x):
    assert q_inverse(q_function(x)) == pytest.approx(x, abs=1e-9)


@given(st.floats(-6.0, 0.0))
def test_inverse_round_trip_negative(x):
    # Q(x) near 1 is stored with absolute error ~1.1e-16, which moves the
    # inverse by up to ulp(1) / phi(x)
    p = q_function(x)
    tol = 1e-9 + np.spacing(p) / math.exp(-0.5 * x * x) * math.sqrt(2 * math.pi)
    assert q_inverse(p) == pytest.approx(x, abs=tol)


def test_inverse_domain():
    for p in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            q_inverse(p)
    assert q_inverse(0.5) == pytest.approx(0.0, abs=1e-12)


def test_single_bit_bound(oracle):
    assert single_bit_bound(1.0, 1.0) == pytest.approx(oracle["Q1"], rel=1e-12)
    assert single_bit_bound(1.0, 0.0) == 0.0
    assert single_bit_bound(2.0, 1e-3) < 1e-300 + 1e-300
    with pytest.raises(ValueError):
        single_bit_bound(1.0, -1.0)


def test_single_bit_bound_matches_monte_carlo():
    rng = np.random.default_rng(0)
    n = 10**6
    errors = np.count_nonzero(1.0 + rng.standard_normal(n) < 0)
    p = single_bit_bound(1.0, 1.0)
    assert abs(errors / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_critical_load(oracle):
    v = critical_load()
    assert v == pytest.approx(oracle["critical_load"], abs=1e-12)
    assert 0 < v < oracle["alpha0"]
