"""Volterra kernel catalogue.

Each kernel is an evaluation function K(t, s) -> R^d together with the
endpoint metadata the quadrature module needs. Evaluation is pure and
vectorized over s; K(t, s) = 0 whenever s >= t (Volterra property).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hypergeometric import hyp2f1_neg_array

__all__ = [
    "VolterraKernel",
    "FractionalParams",
    "make_constant",
    "make_exponential",
    "make_bridge",
    "make_riemann_liouville",
    "make_fbm_molchan_golosov",
    "make_discrete_observation",
    "mean_reverting_input_curve",
]

# relative clamp for the fBm kernel's s -> 0 limit convention
_FBM_S_CLAMP = 1e-12


@dataclass(frozen=True)
class FractionalParams:
    """Hurst exponent and scale of a fractional kernel.

    The default scale sqrt(2H) normalizes the power-law kernel so that
    its squared L2 norm over [0, T] equals T^(2H).
    """

    hurst: float
    scale: float | None = None

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst={self.hurst!r} must lie strictly in (0, 1)")
        if self.scale is None:
            object.__setattr__(self, "scale", math.sqrt(2.0 * self.hurst))
        elif self.scale <= 0.0:
            raise ValueError(f"scale={self.scale!r} must be positive")


@dataclass(frozen=True)
class VolterraKernel:
    """Evaluable two-time kernel with endpoint-singularity metadata.

    Attributes
    ----------
    dim : int
        Number of components d.
    eval : callable
        (t, s_array) -> array of shape (len(s), d); zero where s >= t.
    singularity_exponent : float
        alpha with ||K(t,s)|| ~ C (t-s)^alpha as s -> t (0 if bounded).
    label : str
        Family tag, also used by the scenario schema.
    params : dict
        Family-specific parameters (echoed into output artifacts).
    end_powers : tuple of float
        Per-component power of (t-s) as s -> t.
    origin_powers : tuple of float
        Per-component power of s as s -> 0 (0 if bounded there).
    eval_gap : callable, optional
        (t, r_array) -> K(t, t - r) computed from the gap r = t - s
        directly. Singular families provide this so quadrature nodes
        clustered at s -> t keep the distance exact instead of losing
        it to cancellation in t - s.
    """

    dim: int
    eval: Callable[[float, np.ndarray], np.ndarray]
    singularity_exponent: float
    label: str
    params: dict = field(default_factory=dict)
    end_powers: tuple = ()
    origin_powers: tuple = ()
    eval_gap: Callable[[float, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("kernel dimension must be >= 1")
        if not self.end_powers:
            object.__setattr__(self, "end_powers", (0.0,) * self.dim)
        if not self.origin_powers:
            object.__setattr__(self, "origin_powers", (0.0,) * self.dim)

    def __call__(self, t: float, s) -> np.ndarray:
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = self.eval(t, s_arr)
        return out if np.ndim(s) else out[0]

    def slice_at(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        """The path function s -> K(t, s), used for quadrature."""
        return lambda s: self.eval(t, np.asarray(s, dtype=float))

    def slice_gap_at(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        """The path function r -> K(t, t - r) parametrized by the gap."""
        if self.eval_gap is not None:
            return lambda r: self.eval_gap(t, np.asarray(r, dtype=float))
        return lambda r: self.eval(t, t - np.asarray(r, dtype=float))


def _as_vector(x, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a scalar or a 1-d sequence")
    return v


def make_constant(sigma) -> VolterraKernel:
    """Constant-volatility kernel K(t,s) = sigma for s < t (Brownian output)."""
    sig = _as_vector(sigma, "sigma")
    d = sig.size

    def _eval(t, s):
        live = (s < t).astype(float)
        return live[:, None] * sig[None, :]

    return VolterraKernel(
        dim=d,
        eval=_eval,
        singularity_exponent=0.0,
        label="constant",
        params={"sigma": sig.tolist()},
    )


def make_exponential(lam) -> VolterraKernel:
    """Mean-reverting kernel K_i(t,s) = exp(-lambda_i (t-s)) for s < t.

    lambda may be negative (explosive memory) as well as positive.
    """
    lamv = _as_vector(lam, "lambda")
    d = lamv.size

    def _eval(t, s):
        live = s < t
        out = np.exp(-np.maximum(t - s, 0.0)[:, None] * lamv[None, :])
        out[~live] = 0.0
        return out

    return VolterraKernel(
        dim=d,
        eval=_eval,
        singularity_exponent=0.0,
        label="exponential",
        params={"lambda": lamv.tolist()},
    )


def make_bridge(T0, horizon: float | None = None) -> VolterraKernel:
    """Bridge kernel K_i(t,s) = (T0_i - t)/(T0_i - s) for s < t.

    The pinning times must lie strictly beyond the contract horizon; pass
    horizon to validate here, otherwise model validation enforces it.
    """
    t0 = _as_vector(T0, "T0")
    if np.any(t0 <= 0.0):
        raise ValueError("pinning times T0 must be positive")
    if horizon is not None and not np.all(t0 > horizon):
        raise ValueError(
            f"pinning time T0={t0.tolist()} must exceed the horizon {horizon!r}"
        )
    d = t0.size

    def _eval(t, s):
        live = s < t
        out = (t0[None, :] - t) / (t0[None, :] - s[:, None])
        out[~live] = 0.0
        return out

    return VolterraKernel(
        dim=d,
        eval=_eval,
        singularity_exponent=0.0,
        label="bridge",
        params={"T0": t0.tolist()},
    )


def _fractional_params(p) -> list[FractionalParams]:
    if isinstance(p, FractionalParams):
        return [p]
    if isinstance(p, Sequence):
        out = []
        for item in p:
            out.append(item if isinstance(item, FractionalParams)
                       else FractionalParams(float(item)))
        return out
    return [FractionalParams(float(p))]


def make_riemann_liouville(p) -> VolterraKernel:
    """Power-law kernel K_i(t,s) = c_i (t-s)^(H_i - 1/2) for s < t.

    Accepts a FractionalParams, a bare Hurst value, or a sequence of
    either for a componentwise multi-dimensional kernel.
    """
    params = _fractional_params(p)
    hs = np.array([q.hurst for q in params])
    cs = np.array([q.scale for q in params])
    d = hs.size
    expo = hs - 0.5

    def _eval(t, s):
        live = s < t
        dt = np.where(live, t - s, 1.0)
        out = cs[None, :] * dt[:, None] ** expo[None, :]
        out[~live] = 0.0
        return out

    def _eval_gap(t, r):
        live = r > 0.0
        rv = np.where(live, r, 1.0)
        out = cs[None, :] * rv[:, None] ** expo[None, :]
        out[~live] = 0.0
        return out

    return VolterraKernel(
        dim=d,
        eval=_eval,
        singularity_exponent=float(np.min(expo)),
        label="riemann_liouville",
        params={"H": hs.tolist(), "c_H": cs.tolist()},
        end_powers=tuple(expo),
        origin_powers=(0.0,) * d,
        eval_gap=_eval_gap,
    )


def _fbm_unit_normalizer(h: float) -> float:
    # the bare hypergeometric kernel integrates to V_H * t^(2H) with
    # V_H = Gamma(2-2H) cos(pi H) / (pi H (1-2H)); dividing by sqrt(V_H)
    # restores the unit fBm covariance (s^2H + u^2H - |s-u|^2H)/2
    if abs(h - 0.5) < 1e-9:
        return 1.0
    v = math.gamma(2.0 - 2.0 * h) * math.cos(math.pi * h) / (
        math.pi * h * (1.0 - 2.0 * h))
    return 1.0 / math.sqrt(v)


def make_fbm_molchan_golosov(p) -> VolterraKernel:
    """Fractional Brownian motion kernel (hypergeometric representation).

    K(t,s) proportional to
    (t-s)^(H-1/2)/Gamma(H+1/2) * 2F1(H-1/2; 1/2-H; H+1/2; 1-t/s)
    for 0 < s < t, scaled per component so the induced covariance is the
    unit-variance fBm one, (s^2H + u^2H - |s-u|^2H)/2. The s -> 0 limit
    is handled by clamping s at 1e-12 * t and switching the
    hypergeometric factor to its large-argument form.
    """
    params = _fractional_params(p)
    hs = np.array([q.hurst for q in params])
    d = hs.size
    expo = hs - 0.5
    gammas = np.array([math.gamma(h + 0.5) / _fbm_unit_normalizer(h) for h in hs])

    def _fill(out, live, dtv, z):
        for i in range(d):
            h = hs[i]
            if h == 0.5:
                out[live, i] = 1.0
                continue
            hyp = hyp2f1_neg_array(h - 0.5, 0.5 - h, h + 0.5, z)
            out[live, i] = dtv ** expo[i] / gammas[i] * hyp
        return out

    def _eval(t, s):
        live = (s < t) & (t > 0.0)
        out = np.zeros((s.size, d))
        if not np.any(live):
            return out
        sv = np.maximum(s[live], _FBM_S_CLAMP * t)
        return _fill(out, live, t - sv, 1.0 - t / sv)

    def _eval_gap(t, r):
        live = (r > 0.0) & (t > 0.0)
        out = np.zeros((r.size, d))
        if not np.any(live):
            return out
        # mirror _eval's origin clamp: the gap never reaches t itself
        dtv = np.minimum(r[live], (1.0 - _FBM_S_CLAMP) * t)
        return _fill(out, live, dtv, -dtv / (t - dtv))

    return VolterraKernel(
        dim=d,
        eval=_eval,
        singularity_exponent=float(np.min(expo)),
        label="fbm",
        params={"H": hs.tolist()},
        end_powers=tuple(expo),
        origin_powers=tuple(-abs(e) for e in expo),
        eval_gap=_eval_gap,
    )


def make_discrete_observation(times, horizon: float | None = None) -> VolterraKernel:
    """Impulse kernel K(t,s) = f(t) for s < t with f = 1 exactly on `times`.

    The output process is observed only at the given instants and is zero
    in between. Time membership is decided up to a 1e-12 relative
    tolerance so that grid-derived instants still register.
    """
    tv = _as_vector(times, "times")
    if tv.size == 0:
        raise ValueError("times must be non-empty")
    if np.any(np.diff(tv) <= 0.0):
        raise ValueError("times must be strictly increasing")
    if np.any(tv <= 0.0):
        raise ValueError("times must be positive")
    if horizon is not None and np.any(tv > horizon):
        raise ValueError(f"times must not exceed the horizon {horizon!r}")

    def _f(t):
        return 1.0 if np.any(np.abs(tv - t) <= 1e-12 * max(1.0, abs(t))) else 0.0

    def _eval(t, s):
        live = (s < t).astype(float)
        return (_f(t) * live)[:, None]

    return VolterraKernel(
        dim=1,
        eval=_eval,
        singularity_exponent=0.0,
        label="discrete",
        params={"times": tv.tolist()},
    )


def mean_reverting_input_curve(x0: float, mu0: float, lam: float) -> Callable[[float], float]:
    """Input curve g0(t) = exp(-lambda t) x0 + (mu0/lambda)(1 - exp(-lambda t)).

    This is the mean of the mean-reverting output started at x0 with
    long-run drift mu0; lambda = 0 degenerates to x0 + mu0 * t.
    """

    def _g0(t: float) -> float:
        if lam == 0.0:
            return x0 + mu0 * t
        e = math.exp(-lam * t)
        return e * x0 + (mu0 / lam) * (1.0 - e)

    return _g0
