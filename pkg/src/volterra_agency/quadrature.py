"""Deterministic quadrature for kernel products and control paths.

Panel-composite Gauss-Legendre with power-absorbing endpoint
substitutions: an integrand behaving like (distance)^q near an endpoint
(q > -1 and non-integer) is transformed with u = distance^(q+1), which
turns the pure power into a constant before the open rule is applied.
Nodes never touch the endpoints, and panel sums are compensated
(math.fsum) so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .kernels import VolterraKernel

__all__ = [
    "QuadratureRule",
    "SingularEnd",
    "NodeEvaluationError",
    "DEFAULT_RULE",
    "l2_inner_product",
    "kernel_energy",
    "kernel_gram",
    "kernel_covariance",
    "rule_nodes",
    "segment_nodes",
]

# substitution activation threshold on the endpoint power (the default
# below which an endpoint power is treated as effectively regular)
_POWER_ACTIVATION = 0.05


class NodeEvaluationError(ValueError):
    """An integrand produced a non-finite value at a quadrature node."""

    def __init__(self, node: float, value):
        self.node = node
        self.value = value
        super().__init__(f"non-finite integrand value {value!r} at node {node!r}")


@dataclass(frozen=True)
class SingularEnd:
    """Endpoint singularity marker: each factor behaves like distance^exponent."""

    exponent: float
    end: str = "upper"  # "lower" | "upper"

    def __post_init__(self):
        if self.end not in ("lower", "upper"):
            raise ValueError(f"end={self.end!r} must be 'lower' or 'upper'")
        if not -0.5 < self.exponent < 0.0:
            raise ValueError(
                f"exponent={self.exponent!r} must lie in (-1/2, 0)"
            )


@dataclass(frozen=True)
class QuadratureRule:
    n_panels: int = 64
    nodes_per_panel: int = 10
    singular_end: SingularEnd | None = None

    def __post_init__(self):
        if self.n_panels < 1 or self.nodes_per_panel < 1:
            raise ValueError("n_panels and nodes_per_panel must be positive")

    def refined(self) -> "QuadratureRule":
        """The same rule with the panel count doubled (convergence checks)."""
        return QuadratureRule(2 * self.n_panels, self.nodes_per_panel,
                              self.singular_end)


DEFAULT_RULE = QuadratureRule()


@lru_cache(maxsize=32)
def _gl_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel_nodes(a: float, b: float, n_panels: int, order: int):
    x, w = _gl_nodes(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def rule_nodes(T: float, rule: QuadratureRule = DEFAULT_RULE):
    """Composite nodes and weights on [0, T], without endpoint substitution.

    All nodes are interior, so integrands that blow up at 0 or T stay
    evaluable; callers needing singularity-absorbing nodes should go
    through the kernel-aware integrators instead.
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    return _panel_nodes(0.0, T, rule.n_panels, rule.nodes_per_panel)


def segment_nodes(a: float, b: float, rule: QuadratureRule = DEFAULT_RULE,
                  q_lower: float = 0.0, q_upper: float = 0.0):
    """Nodes and weights on (a, b) absorbing endpoint powers.

    q_lower and q_upper describe integrand behavior ~ (x-a)^q_lower near
    a and ~ (b-x)^q_upper near b; fractional powers trigger the
    power-absorbing substitution, integer or negligible ones fall back
    to the plain composite rule.
    """
    if b <= a:
        raise ValueError(f"empty segment ({a!r}, {b!r})")
    x, w, _ = _product_nodes(a, b, q_lower, q_upper, rule)
    return x, w


def _power_nodes(a: float, b: float, q: float, end: str,
                 n_panels: int, order: int):
    # u = (distance from the singular end)^(q+1) maps the power (.)^q to a
    # constant; weights carry the back-transform Jacobian. The exact
    # distance r is returned as well: x alone cannot represent nodes
    # closer to the singular end than one ulp.
    p = q + 1.0
    span = (b - a) ** p
    u, wu = _panel_nodes(0.0, span, n_panels, order)
    r = u ** (1.0 / p)
    x = a + r if end == "lower" else b - r
    w = wu * (r / u) / p
    return x, w, r


def _active(q: float) -> bool:
    # integer powers are analytic; small fractional powers are handled
    # well enough by the plain open rule
    return abs(q - round(q)) > 1e-9 and abs(q) > _POWER_ACTIVATION


def _product_nodes(a: float, b: float, q_lower: float, q_upper: float,
                   rule: QuadratureRule):
    """Nodes, weights and exact upper gaps b - x for endpoint powers.

    The integrand is assumed ~ (x-a)^q_lower near a and (b-x)^q_upper
    near b; active fractional powers switch the corresponding end to
    substituted nodes. The third return value keeps the distance to b
    exact even where b - x underflows the float spacing at b.
    """
    if b <= a:
        return np.empty(0), np.empty(0), np.empty(0)
    lo, up = _active(q_lower), _active(q_upper)
    if lo and up:
        m = 0.5 * (a + b)
        half = max(rule.n_panels // 2, 1)
        x1, w1, _ = _power_nodes(a, m, q_lower, "lower", half,
                                 rule.nodes_per_panel)
        x2, w2, r2 = _power_nodes(m, b, q_upper, "upper", half,
                                  rule.nodes_per_panel)
        x = np.concatenate([x1, x2])
        w = np.concatenate([w1, w2])
        return x, w, np.concatenate([b - x1, r2])
    if lo:
        x, w, _ = _power_nodes(a, b, q_lower, "lower", rule.n_panels,
                               rule.nodes_per_panel)
        return x, w, b - x
    if up:
        x, w, r = _power_nodes(a, b, q_upper, "upper", rule.n_panels,
                               rule.nodes_per_panel)
        return x, w, r
    x, w = _panel_nodes(a, b, rule.n_panels, rule.nodes_per_panel)
    return x, w, b - x


def _eval_path(f: Callable, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(x), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if not np.all(np.isfinite(vals)):
        bad = int(np.argwhere(~np.isfinite(vals))[0][0])
        raise NodeEvaluationError(float(x[bad]), vals[bad].tolist())
    return vals


def _fsum(contrib: np.ndarray) -> float:
    return math.fsum(contrib.tolist())


def l2_inner_product(f: Callable, g: Callable, T: float,
                     rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Approximate the L2 pairing integral of f and g over [0, T].

    f and g map an array of times in (0, T) to arrays of shape (n,) or
    (n, d). When the rule carries a singular_end marker, the power
    2*exponent (both factors singular) is absorbed at that endpoint.
    """
    q = 0.0
    end = "upper"
    if rule.singular_end is not None:
        q = 2.0 * rule.singular_end.exponent
        end = rule.singular_end.end
    q_lower = q if end == "lower" else 0.0
    q_upper = q if end == "upper" else 0.0
    x, w, _ = _product_nodes(0.0, T, q_lower, q_upper, rule)
    fv = _eval_path(f, x)
    gv = _eval_path(g, x)
    if fv.shape != gv.shape:
        raise ValueError(f"incompatible path shapes {fv.shape} and {gv.shape}")
    return _fsum(np.sum(fv * gv, axis=1) * w)


def _component_pair_integral(K: VolterraKernel, t_rows, lower: float,
                             upper: float, rule: QuadratureRule,
                             pairs) -> dict:
    """Integrals of K_i(t1, .) K_j(t2, .) over (lower, upper) for index pairs.

    t_rows is (t1, t2); singular powers at the upper endpoint only apply
    for the slice whose outer time equals the integration endpoint.
    """
    t1, t2 = t_rows
    out = {}
    groups: dict[tuple, list] = {}
    for (i, j) in pairs:
        q_up = (K.end_powers[i] if t1 == upper else 0.0) + \
               (K.end_powers[j] if t2 == upper else 0.0)
        q_lo = (K.origin_powers[i] + K.origin_powers[j]) if lower == 0.0 else 0.0
        groups.setdefault((q_lo, q_up), []).append((i, j))
    for (q_lo, q_up), members in groups.items():
        x, w, gap = _product_nodes(lower, upper, q_lo, q_up, rule)
        if x.size == 0:
            for (i, j) in members:
                out[(i, j)] = 0.0
            continue
        # the slice pinned at the integration endpoint is evaluated
        # through its exact gap so substituted nodes keep full precision
        def _values(t_row):
            if _active(q_up) and t_row == upper:
                return _eval_path(K.slice_gap_at(t_row), gap)
            return _eval_path(K.slice_at(t_row), x)

        v1 = _values(t1)
        v2 = v1 if t2 == t1 else _values(t2)
        for (i, j) in members:
            out[(i, j)] = _fsum(v1[:, i] * v2[:, j] * w)
    return out


def kernel_gram(K: VolterraKernel, T: float,
                rule: QuadratureRule = DEFAULT_RULE,
                lower: float = 0.0) -> np.ndarray:
    """Gram matrix of the terminal slice: integral of K(T,s) K(T,s)^T ds.

    Integration runs over (lower, T); every bilinear form the contract
    formulas need reduces to traces against this matrix.
    """
    d = K.dim
    pairs = [(i, j) for i in range(d) for j in range(i, d)]
    vals = _component_pair_integral(K, (T, T), lower, T, rule, pairs)
    G = np.zeros((d, d))
    for (i, j), v in vals.items():
        G[i, j] = v
        G[j, i] = v
    return G


def kernel_energy(K: VolterraKernel, T: float,
                  rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Squared L2 norm of the terminal slice K(T, .) over [0, T]."""
    return float(np.trace(kernel_gram(K, T, rule)))


def kernel_covariance(K: VolterraKernel, s: float, u: float,
                      rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Covariance integral of the kernel process at times (s, u).

    Returns the integral over (0, min(s,u)) of <K(s,r), K(u,r)> dr.
    """
    m = min(s, u)
    if m <= 0.0:
        return 0.0
    pairs = [(i, i) for i in range(K.dim)]
    vals = _component_pair_integral(K, (s, u), 0.0, m, rule, pairs)
    return math.fsum(vals[(i, i)] for i in range(K.dim))
