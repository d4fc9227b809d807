"""Differential resolvents of convolution measures.

Solves R' = mu * R, R(0) = I on a uniform grid and exposes the induced
Volterra kernel K(t,s) = R(t-s) sigma and input curve
g0(t) = R(t) X0 + int_0^t R(t-s) h(s) ds for linear stochastic
integro-differential models with delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernels import VolterraKernel

__all__ = [
    "ConvolutionMeasure",
    "Resolvent",
    "IntegroModel",
    "solve_resolvent",
    "induced_kernel",
    "induced_input_curve",
]


def _as_matrix(a, d: int | None = None) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"weight must be a square matrix, got shape {m.shape}")
    if d is not None and m.shape[0] != d:
        raise ValueError(f"inconsistent dimensions: {m.shape[0]} vs {d}")
    return m


@dataclass(frozen=True)
class ConvolutionMeasure:
    """Measure mu = sum_k a_k delta_{t_k} + density(s) ds on [0, T].

    Atom weights and density values are d x d matrices; scalars are
    promoted to 1 x 1.
    """

    atoms: tuple = ()
    density: Callable[[float], np.ndarray] | None = None
    dim: int = 1

    def __post_init__(self):
        norm = []
        d = None
        for (t, a) in self.atoms:
            m = _as_matrix(a, d)
            d = m.shape[0]
            if t < 0.0:
                raise ValueError(f"atom location {t!r} must be non-negative")
            norm.append((float(t), m))
        norm.sort(key=lambda p: p[0])
        locs = [t for t, _ in norm]
        if any(locs[i] >= locs[i + 1] for i in range(len(locs) - 1)):
            raise ValueError("atom locations must be distinct")
        if d is None:
            d = self.dim
        elif self.dim != d:
            object.__setattr__(self, "dim", d)
        if self.density is not None:
            probe = _as_matrix(self.density(0.0), d)
            del probe
        object.__setattr__(self, "atoms", tuple(norm))

    def min_gap(self) -> float:
        """Smallest spacing among {0} and the atom locations."""
        locs = [t for t, _ in self.atoms if t > 0.0]
        if not locs:
            return math.inf
        gaps = [locs[0]] + [locs[i + 1] - locs[i] for i in range(len(locs) - 1)]
        return min(gaps)


@dataclass(frozen=True)
class Resolvent:
    grid: np.ndarray                 # (n+1,) uniform, grid[0] = 0
    values: np.ndarray               # (n+1, d, d), values[0] = identity

    def __post_init__(self):
        if not np.allclose(self.values[0], np.eye(self.values.shape[1])):
            raise ValueError("resolvent must start at the identity")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t) -> np.ndarray:
        """Linear interpolation of R at times t (clamped to the grid span)."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        h = self.grid[1] - self.grid[0]
        pos = np.clip(tt / h, 0.0, len(self.grid) - 1.0)
        idx = np.minimum(pos.astype(int), len(self.grid) - 2)
        frac = (pos - idx)[:, None, None]
        out = self.values[idx] * (1.0 - frac) + self.values[idx + 1] * frac
        return out if np.ndim(t) else out[0]


@dataclass(frozen=True)
class IntegroModel:
    X0: np.ndarray
    h: Callable[[float], np.ndarray] | None
    sigma: np.ndarray
    mu: ConvolutionMeasure

    def __post_init__(self):
        d = self.mu.dim
        object.__setattr__(self, "X0", np.atleast_1d(np.asarray(self.X0, float)))
        object.__setattr__(self, "sigma", _as_matrix(self.sigma, d))
        if self.X0.shape != (d,):
            raise ValueError(f"X0 must have shape ({d},), got {self.X0.shape}")


def _interp_rows(values: np.ndarray, h: float, t: float) -> np.ndarray:
    # linear interpolation among already-computed rows of R
    pos = t / h
    idx = int(pos)
    if idx >= values.shape[0] - 1:
        return values[-1]
    frac = pos - idx
    if frac == 0.0:
        return values[idx]
    return values[idx] * (1.0 - frac) + values[idx + 1] * frac


def solve_resolvent(mu: ConvolutionMeasure, T: float, n: int) -> Resolvent:
    """March R' = mu * R from R(0) = I over n uniform steps on [0, T].

    The convolution (mu * R)(t) sums atom terms a_k R(t - t_k) over the
    closed interval t_k <= t plus a density integral with trapezoidal
    weights. The step integrates R' over [t_i, t_{i+1}] with the
    trapezoid rule, except that each atom's contribution is integrated
    exactly over the subinterval where it is active (the convolution
    integrand jumps when an atom switches on, and a trapezoid straddling
    the jump would drop the scheme to first order). The R(t_{i+1})
    coefficients (atom at zero, density at zero) sit on the left-hand
    solve, making the scheme implicit-trapezoidal and second order.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if T <= 0.0:
        raise ValueError("T must be positive")
    dt = T / n
    gap = mu.min_gap()
    if dt > gap:
        raise ValueError(
            f"step {dt!r} cannot resolve the smallest atom gap {gap!r}; "
            f"increase n"
        )
    d = mu.dim
    eye = np.eye(d)
    grid = np.linspace(0.0, T, n + 1)
    R = np.empty((n + 1, d, d))
    R[0] = eye

    a0 = np.zeros((d, d))
    shifted = []  # atoms strictly inside (0, T]
    for (tk, ak) in mu.atoms:
        if tk == 0.0:
            a0 = ak
        elif tk <= T:
            shifted.append((tk, ak))
    rho = None
    if mu.density is not None:
        rho = np.stack([_as_matrix(mu.density(t), d) for t in grid])

    def density_conv_known(k: int) -> np.ndarray:
        """Density part of (mu * R)(grid[k]) omitting the rho(0) R(grid[k]) term."""
        acc = np.zeros((d, d))
        if rho is None or k == 0:
            return acc
        if k >= 2:
            acc = np.einsum("jab,jbc->ac", rho[1:k], R[k - 1:0:-1])
        return dt * (acc + 0.5 * (rho[k] @ R[0]))

    lhs = eye - 0.5 * dt * a0
    if rho is not None:
        lhs = lhs - 0.25 * dt * dt * rho[0]

    for i in range(n):
        t0, t1 = grid[i], grid[i + 1]
        # atom at 0: trapezoid (dt/2)(R_i + R_{i+1}); known half here
        inc = 0.5 * dt * (a0 @ R[i])
        for (tk, ak) in shifted:
            if tk > t1:
                continue
            # exact activation: integrate a_k R(s - t_k) over [max(t0,tk), t1];
            # t1 - tk <= t0 because dt <= min gap, so both endpoints are known
            start = max(t0, tk)
            span = t1 - start
            if span <= 0.0:
                continue
            left = _interp_rows(R[: i + 1], dt, start - tk)
            right = _interp_rows(R[: i + 1], dt, t1 - tk)
            inc = inc + 0.5 * span * (ak @ (left + right))
        if rho is not None:
            dk0 = density_conv_known(i) + (0.0 if i == 0 else dt * 0.5 * (rho[0] @ R[i]))
            inc = inc + 0.5 * dt * (dk0 + density_conv_known(i + 1))
        R[i + 1] = np.linalg.solve(lhs, R[i] + inc)

    return Resolvent(grid=grid, values=R)


def induced_kernel(model: IntegroModel, res: Resolvent,
                   w: np.ndarray | None = None) -> VolterraKernel:
    """Volterra kernel of the aggregated output: K(t,s) = w^T R(t-s) sigma.

    w is the aggregation vector mapping the vector solution to the scalar
    contracting output; default is the first coordinate.
    """
    d = res.dim
    if w is None:
        wv = np.zeros(d)
        wv[0] = 1.0
    else:
        wv = np.atleast_1d(np.asarray(w, dtype=float))
        if wv.shape != (d,):
            raise ValueError(f"aggregation vector must have shape ({d},)")
    sigma = model.sigma
    d_noise = sigma.shape[1]

    def _eval(t, s):
        live = s < t
        out = np.zeros((s.size, d_noise))
        if np.any(live):
            rmats = res(np.maximum(t - s[live], 0.0))
            out[live] = np.einsum("a,nab,bc->nc", wv, rmats, sigma)
        return out

    return VolterraKernel(
        dim=d_noise,
        eval=_eval,
        singularity_exponent=0.0,
        label="resolvent",
        params={"w": wv.tolist()},
    )


def induced_input_curve(model: IntegroModel,
                        res: Resolvent) -> Callable[[float], np.ndarray]:
    """Deterministic part of the solution: g0(t) = R(t)X0 + int R(t-s)h(s)ds.

    The convolution with h uses the trapezoid rule on the resolvent grid
    restricted to [0, t].
    """
    grid = res.grid
    dt = grid[1] - grid[0]
    hv = None
    if model.h is not None:
        hv = np.stack([np.atleast_1d(np.asarray(model.h(t), float))
                       for t in grid])

    def _g0(t: float) -> np.ndarray:
        out = res(t) @ model.X0
        if hv is None or t <= 0.0:
            return out
        k = min(int(t / dt), len(grid) - 1)
        # interior grid points plus the partial last cell [grid[k], t]
        conv = np.zeros_like(out)
        if k >= 1:
            rmats = res(t - grid[:k + 1])
            vals = np.einsum("nab,nb->na", rmats, hv[: k + 1])
            conv = dt * (0.5 * vals[0] + vals[1:k].sum(axis=0) + 0.5 * vals[k])
        rem = t - grid[k]
        if rem > 1e-14 * max(1.0, t):
            h_t = np.atleast_1d(np.asarray(model.h(t), float))
            conv = conv + 0.5 * rem * (res(t - grid[k]) @ hv[k] + res(0.0) @ h_t)
        return out + conv

    return _g0
