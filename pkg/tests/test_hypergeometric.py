"""gauss_2f1 against a high-precision independent implementation."""

import math

import mpmath
import numpy as np
import pytest

from volterra_agency import gauss_2f1, SeriesConvergenceError
from volterra_agency.hypergeometric import hyp2f1_neg_array

mpmath.mp.dps = 40


def _reference(a, b, c, z):
    return float(mpmath.hyp2f1(a, b, c, z))


@pytest.mark.parametrize("z", [0.0, -1e-8, -0.1, -0.5, -1.0, -2.5, -8.9])
@pytest.mark.parametrize("a,b,c", [
    (-0.2, 0.7, 0.8),       # rough fractional parameters (H = 0.3)
    (0.2, -0.7, 1.2),       # smooth fractional parameters (H = 0.7)
    (0.45, -0.45, 0.95),
    (1.3, 2.1, 3.7),
    (-1.0, 0.5, 2.0),       # terminating series
])
def test_matches_mpmath_moderate_arguments(a, b, c, z):
    got = gauss_2f1(a, b, c, z)
    want = _reference(a, b, c, z)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("z", [-9.5, -20.0, -1e3, -1e6, -1e11])
@pytest.mark.parametrize("a,b,c", [
    (-0.2, 0.7, 0.8),
    (0.2, -0.7, 1.2),
    (0.35, -0.35, 0.85),
])
def test_matches_mpmath_large_negative_arguments(a, b, c, z):
    got = float(hyp2f1_neg_array(a, b, c, np.array([z]))[0])
    want = _reference(a, b, c, z)
    assert got == pytest.approx(want, rel=1e-10)


def test_zero_argument_and_degenerate_parameters():
    assert gauss_2f1(0.3, 0.4, 1.1, 0.0) == 1.0
    # either upper parameter zero collapses every term after the first
    assert gauss_2f1(0.0, 0.4, 1.1, -3.0) == 1.0
    assert gauss_2f1(0.3, 0.0, 1.1, -7.0) == 1.0


def test_vectorized_evaluation_spans_the_switch():
    a, b, c = -0.2, 0.7, 0.8
    z = -np.logspace(-3, 4, 41)
    got = hyp2f1_neg_array(a, b, c, z)
    want = np.array([_reference(a, b, c, zz) for zz in z])
    assert np.max(np.abs(got / want - 1.0)) < 1e-10


def test_rejects_positive_argument():
    with pytest.raises(ValueError):
        gauss_2f1(0.3, 0.4, 1.1, 0.5)


def test_rejects_nonpositive_integer_c():
    with pytest.raises(ValueError):
        gauss_2f1(0.3, 0.4, -2.0, -0.5)
    with pytest.raises(ValueError):
        gauss_2f1(0.3, 0.4, 0.0, -0.5)


def test_pfaff_reflection_consistency():
    # 2F1(a,b;c;z) = (1-z)^(c-a-b) 2F1(c-a, c-b; c; z) (Euler), an
    # internal consistency relation independent of the oracle
    a, b, c = 0.25, -0.6, 1.3
    for z in (-0.3, -1.7, -6.0):
        lhs = gauss_2f1(a, b, c, z)
        rhs = (1.0 - z) ** (c - a - b) * gauss_2f1(c - a, c - b, c, z)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_series_budget_error_is_reported():
    # w -> 1 requires z -> -inf on the Pfaff path; the scalar entry
    # point only series-sums, so a huge |z| exhausts the budget
    with pytest.raises(SeriesConvergenceError):
        gauss_2f1(0.3, 0.4, 1.1, -1e9)
