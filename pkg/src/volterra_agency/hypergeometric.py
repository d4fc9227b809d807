"""Gauss hypergeometric function on the non-positive real axis.

Only the regime z <= 0 is implemented: that is the whole range the
fractional-kernel machinery needs, and there the Pfaff transformation
maps the argument into [0, 1) where the defining power series converges.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["gauss_2f1", "SeriesConvergenceError"]

_MAX_TERMS = 10**6
_REL_TOL = 1e-13
# Pfaff argument w = z/(z-1) stays <= 0.9 for z >= -9; beyond that the
# series slows down and the large-argument connection formula takes over.
_CONNECTION_SWITCH = -9.0


class SeriesConvergenceError(ArithmeticError):
    """Hypergeometric series failed to converge within the term budget."""


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def _series(a: float, b: float, c: float, w: float) -> float:
    """Power series sum of 2F1(a, b; c; w) for 0 <= w < 1."""
    term = 1.0
    total = 1.0
    n = 0
    while n < _MAX_TERMS:
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * w
        total += term
        n += 1
        # once the term ratio has settled near w the remaining tail is
        # bounded by |term| * w/(1-w); stop when that bound is negligible
        if 2.0 * abs(term) * w <= _REL_TOL * (1.0 - w) * abs(total):
            return total
    raise SeriesConvergenceError(
        f"2F1 series needs more than {_MAX_TERMS} terms at transformed "
        f"argument w={w!r} (too close to 1)"
    )


def _series_vec(a: float, b: float, c: float, w: np.ndarray) -> np.ndarray:
    """Vectorized power series over an array of arguments in [0, 1)."""
    term = np.ones_like(w)
    total = np.ones_like(w)
    n = 0
    while n < _MAX_TERMS:
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * w
        total = total + term
        n += 1
        if np.all(2.0 * np.abs(term) * w <= _REL_TOL * (1.0 - w) * np.abs(total)):
            return total
    raise SeriesConvergenceError(
        f"2F1 series needs more than {_MAX_TERMS} terms at transformed "
        f"argument max w={float(np.max(w))!r} (too close to 1)"
    )


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Evaluate 2F1(a, b; c; z) for z <= 0.

    Uses the Pfaff transformation
    2F1(a, b; c; z) = (1-z)^(-a) * 2F1(a, c-b; c; z/(z-1))
    followed by the power series at the transformed argument, which lies
    in [0, 1) for every z <= 0.

    Raises
    ------
    ValueError
        If z > 0 or c is a nonpositive integer.
    SeriesConvergenceError
        If the series needs more than 1e6 terms (z/(z-1) too close to 1).
    """
    if z > 0.0:
        raise ValueError(f"argument z={z!r} outside the supported range z <= 0")
    if _is_nonpositive_integer(c):
        raise ValueError(f"parameter c={c!r} is a nonpositive integer")
    if z == 0.0 or a == 0.0 or b == 0.0:
        return 1.0
    w = z / (z - 1.0)
    return (1.0 - z) ** (-a) * _series(a, c - b, c, w)


def _pfaff_vec(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    w = z / (z - 1.0)
    return (1.0 - z) ** (-a) * _series_vec(a, c - b, c, w)


def _connection_vec(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    """Large-negative-argument evaluation via the 1/z connection formula.

    Requires a - b not an integer (the two gamma prefactors are finite).
    The inner series run at 1/z in (-1/9, 0) and converge in a handful
    of terms.
    """
    lg = math.gamma
    pref_a = lg(c) * lg(b - a) / (lg(b) * lg(c - a))
    pref_b = lg(c) * lg(a - b) / (lg(a) * lg(c - b))
    inv = 1.0 / z
    fa = _pfaff_vec(a, a - c + 1.0, a - b + 1.0, inv)
    fb = _pfaff_vec(b, b - c + 1.0, b - a + 1.0, inv)
    return pref_a * (-z) ** (-a) * fa + pref_b * (-z) ** (-b) * fb


def hyp2f1_neg_array(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    """2F1(a, b; c; z) over an array of arguments z <= 0.

    Pfaff + series for moderate arguments; for z < -9 the connection
    formula keeps the cost bounded as z -> -infinity (needed by the
    fractional Brownian motion kernel near s = 0, where the clamped
    argument can reach -1e12 and the plain series would exceed its term
    budget long before converging).
    """
    z = np.asarray(z, dtype=float)
    if np.any(z > 0.0):
        raise ValueError("arguments must satisfy z <= 0")
    if a == 0.0 or b == 0.0:
        return np.ones_like(z)
    out = np.empty_like(z)
    near = z >= _CONNECTION_SWITCH
    if np.any(near):
        out[near] = _pfaff_vec(a, b, c, z[near])
    far = ~near
    if np.any(far):
        if abs((a - b) - round(a - b)) < 1e-8:
            # degenerate gamma prefactors; fall back to the series, which
            # may legitimately report non-convergence
            out[far] = _pfaff_vec(a, b, c, z[far])
        else:
            out[far] = _connection_vec(a, b, c, z[far])
    return out
