"""Closed-form second-best contracts for Gaussian Volterra agency models.

The principal observes the terminal output X_T of a Gaussian Volterra
process whose drift the agent controls at quadratic cost; both parties
have exponential utility. Everything the optimal contract needs is a
function of the terminal kernel slice K(T, .), so the module reduces to
Gram-matrix algebra: G = integral of K(T,s) K(T,s)^T over [0, T].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .kernels import (
    FractionalParams,
    VolterraKernel,
    make_constant,
    make_exponential,
    make_riemann_liouville,
)
from .quadrature import DEFAULT_RULE, QuadratureRule, kernel_gram, rule_nodes

__all__ = [
    "AgencyModel",
    "EffortPolicy",
    "ContractQuote",
    "SweepGrid",
    "DegenerateModelError",
    "SWEEP_COLUMNS",
    "dual_cost",
    "agent_best_response",
    "optimal_effort",
    "phi0",
    "principal_value_sb",
    "optimal_contract_1d",
    "contract_quote",
    "optimal_linear_slope",
    "chi0",
    "value_of_information",
    "voi_spectral",
    "voi_upper_bound",
    "voi_sweep",
]

_SYM_TOL = 1e-12
_EIG_FLOOR = 1e-10
# kernels whose terminal slice carries no L2 mass admit no incentive
# component; below this energy the linear slope is undefined
_ENERGY_FLOOR = 1e-13


class DegenerateModelError(ValueError):
    """The kernel carries no terminal information (zero L2 energy)."""


def _input_curve(g0) -> Callable[[float], float]:
    if g0 is None:
        return lambda t: 0.0
    if callable(g0):
        return g0
    value = float(g0)
    return lambda t: value


@dataclass(frozen=True)
class AgencyModel:
    """Preferences, effort cost, horizon and output dynamics.

    cost is either a scalar kappa > 0 (one-dimensional effort) or a
    d x d symmetric positive-definite matrix Gamma. g0 may be None
    (zero input curve), a constant, or a callable on [0, T].
    """

    gamma_A: float
    gamma_P: float
    cost: float | Sequence | np.ndarray
    kernel: VolterraKernel
    T: float
    y0: float = 0.0
    g0: Callable[[float], float] | float | None = None
    rule: QuadratureRule = DEFAULT_RULE

    def __post_init__(self):
        if self.gamma_A <= 0.0 or self.gamma_P <= 0.0:
            raise ValueError("risk aversions gamma_A, gamma_P must be positive")
        if self.T <= 0.0:
            raise ValueError("horizon T must be positive")
        d = self.kernel.dim
        if np.ndim(self.cost) == 0:
            if float(self.cost) <= 0.0:
                raise ValueError(f"scalar cost kappa={self.cost!r} must be positive")
            if d != 1:
                raise ValueError(
                    f"scalar cost requires a 1-d kernel, got dim={d}"
                )
        else:
            gamma = np.asarray(self.cost, dtype=float)
            if gamma.shape != (d, d):
                raise ValueError(
                    f"cost matrix shape {gamma.shape} does not match kernel dim {d}"
                )
            scale = max(1.0, float(np.max(np.abs(gamma))))
            if float(np.max(np.abs(gamma - gamma.T))) > _SYM_TOL * scale:
                raise ValueError("cost matrix must be symmetric")
            if float(np.min(np.linalg.eigvalsh(gamma))) <= _EIG_FLOOR:
                raise ValueError(
                    f"cost matrix must have eigenvalues > {_EIG_FLOOR}"
                )
        if self.kernel.label == "bridge":
            t0_min = min(self.kernel.params["T0"])
            if t0_min <= self.T:
                raise ValueError(
                    f"bridge pinning time {t0_min!r} must exceed the horizon {self.T!r}"
                )
        if self.kernel.label == "discrete":
            t_max = max(self.kernel.params["times"])
            if t_max > self.T * (1.0 + 1e-12):
                raise ValueError(
                    f"observation time {t_max!r} lies beyond the horizon {self.T!r}"
                )

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @cached_property
    def Gamma(self) -> np.ndarray:
        if np.ndim(self.cost) == 0:
            return np.array([[float(self.cost)]])
        return np.asarray(self.cost, dtype=float).copy()

    @cached_property
    def Gamma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.Gamma)

    @property
    def kappa(self) -> float:
        if self.dim != 1:
            raise ValueError("kappa is only defined for 1-d cost")
        return float(self.Gamma[0, 0])

    @cached_property
    def input_curve(self) -> Callable[[float], float]:
        return _input_curve(self.g0)

    def g0_terminal(self) -> float:
        return float(self.input_curve(self.T))

    @cached_property
    def gram(self) -> np.ndarray:
        """G = integral over [0,T] of K(T,s) K(T,s)^T ds."""
        return kernel_gram(self.kernel, self.T, self.rule)

    def kernel_energy(self) -> float:
        return float(np.trace(self.gram))

    # shorthand matrices of the closed forms; A and S commute since both
    # are polynomials in Gamma^-1
    @cached_property
    def _A(self) -> np.ndarray:
        return self.gamma_P * np.eye(self.dim) + self.Gamma_inv

    @cached_property
    def _S(self) -> np.ndarray:
        return self.gamma_A * np.eye(self.dim) + self._A

    @cached_property
    def _W(self) -> np.ndarray:
        # W = S^-1 A, the map from terminal kernel slice to optimal beta
        w = np.linalg.solve(self._S, self._A)
        return 0.5 * (w + w.T)


@dataclass(frozen=True)
class EffortPolicy:
    """Deterministic sensitivity path beta and the induced effort.

    effort solves the agent's pointwise optimization: a = Gamma^-1 beta.
    beta_fn, when present, evaluates beta exactly at arbitrary times;
    otherwise beta_at interpolates the gridded values.
    """

    grid: np.ndarray
    beta: np.ndarray
    effort: np.ndarray
    beta_fn: Callable[[float], np.ndarray] | None = None
    effort_fn: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 1:
            beta = beta[:, None]
        effort = np.asarray(self.effort, dtype=float)
        if effort.ndim == 1:
            effort = effort[:, None]
        if beta.shape != (grid.size, effort.shape[1]) or beta.shape != effort.shape:
            raise ValueError("grid, beta and effort shapes are inconsistent")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "effort", effort)

    @property
    def dim(self) -> int:
        return self.beta.shape[1]

    @staticmethod
    def _evaluate(fn, grid, values, t) -> np.ndarray:
        if fn is not None:
            if np.ndim(t) == 0:
                return np.atleast_1d(np.asarray(fn(float(t)), dtype=float))
            return np.stack([
                np.atleast_1d(np.asarray(fn(float(u)), dtype=float))
                for u in np.asarray(t, dtype=float)
            ])
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        cols = [np.interp(t_arr, grid, values[:, j])
                for j in range(values.shape[1])]
        out = np.stack(cols, axis=1)
        return out if np.ndim(t) else out[0]

    def beta_at(self, t) -> np.ndarray:
        """beta evaluated at scalar or vector t, shape (d,) or (n, d)."""
        return self._evaluate(self.beta_fn, self.grid, self.beta, t)

    def effort_at(self, t) -> np.ndarray:
        """effort evaluated at scalar or vector t, shape (d,) or (n, d)."""
        return self._evaluate(self.effort_fn, self.grid, self.effort, t)


@dataclass(frozen=True)
class ContractQuote:
    """Optimal contract summary: pay rule, exponents and values."""

    slope: float
    intercept: float
    integral_term: float
    beta_star: EffortPolicy
    phi0: float
    chi0: float
    V_SB: float
    V_lin: float
    voi: float
    agent_value: float
    degenerate: bool = False


def dual_cost(z, model: AgencyModel) -> float:
    """Drift dual f*(z) = (gamma_A/2)|z|^2 + inf_a {cost(a) - <a, z>}."""
    zv = np.atleast_1d(np.asarray(z, dtype=float))
    m = model.gamma_A * np.eye(model.dim) - model.Gamma_inv
    return 0.5 * float(zv @ m @ zv)


def agent_best_response(beta: EffortPolicy, model: AgencyModel) -> EffortPolicy:
    """Pointwise optimal effort a(t) = Gamma^-1 beta(t) for a given sensitivity."""
    if beta.dim != model.dim:
        raise ValueError(
            f"policy dim {beta.dim} does not match model dim {model.dim}"
        )
    effort = beta.beta @ model.Gamma_inv.T
    effort_fn = None
    if beta.beta_fn is not None:
        g_inv, fn = model.Gamma_inv, beta.beta_fn
        effort_fn = lambda t: g_inv @ np.atleast_1d(fn(t))
    return EffortPolicy(grid=beta.grid, beta=beta.beta, effort=effort,
                        beta_fn=beta.beta_fn, effort_fn=effort_fn)


def optimal_effort(model: AgencyModel) -> EffortPolicy:
    """Second-best sensitivity beta*(t) = S^-1 A K(T, t) on the rule nodes."""
    nodes, _ = rule_nodes(model.T, model.rule)
    k_slice = model.kernel.slice_at(model.T)
    beta = np.asarray(k_slice(nodes), dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    w = model._W

    def beta_fn(t: float) -> np.ndarray:
        return w @ np.atleast_1d(model.kernel(model.T, float(t)))

    g_inv = model.Gamma_inv

    def effort_fn(t: float) -> np.ndarray:
        return g_inv @ beta_fn(t)

    beta = beta @ w.T
    return EffortPolicy(grid=nodes, beta=beta, effort=beta @ g_inv.T,
                        beta_fn=beta_fn, effort_fn=effort_fn)


def phi0(model: AgencyModel) -> float:
    """Deterministic exponent of the second-best principal value at t=0."""
    bracket = model.gamma_P * np.eye(model.dim) - model._A @ model._W
    bracket = 0.5 * (bracket + bracket.T)
    return 0.5 * model.gamma_P * float(np.trace(bracket @ model.gram))


def principal_value_sb(model: AgencyModel) -> float:
    """V_SB = -exp(-gamma_P (g0(T) - y0) + phi0), always negative."""
    return -math.exp(-model.gamma_P * (model.g0_terminal() - model.y0)
                     + phi0(model))


def optimal_linear_slope(model: AgencyModel) -> float:
    """Best linear share b* = <K, A K> / <K, S K> in L2 over [0, T]."""
    g = model.gram
    if float(np.trace(g)) <= _ENERGY_FLOOR:
        raise DegenerateModelError(
            "kernel energy is numerically zero; the linear slope is undefined "
            "and the contract pays the constant reservation amount"
        )
    return float(np.trace(model._A @ g) / np.trace(model._S @ g))


def chi0(model: AgencyModel) -> float:
    """Exponent of the best-linear principal value; chi0 >= phi0."""
    b = optimal_linear_slope(model)
    bracket = model.gamma_P * np.eye(model.dim) - b * model._A
    return 0.5 * model.gamma_P * float(np.trace(bracket @ model.gram))


def value_of_information(model: AgencyModel) -> float:
    """exp(phi0 - chi0) in [0, 1]; 1 when linear contracts lose nothing."""
    try:
        gap = chi0(model) - phi0(model)
    except DegenerateModelError:
        return 1.0
    # the gap is nonnegative analytically; guard rounding at the radial edge
    return min(1.0, math.exp(-gap))


def voi_spectral(model: AgencyModel) -> float:
    """chi0 - phi0 via the eigendecomposition of Gamma.

    With Gamma = P diag(lambda) P^T, eta_i = gamma_P + 1/lambda_i and
    q_i the rotated-kernel component energies, the gap equals
    (gamma_P/2) [sum eta^2 q / (gamma_A + eta) -
                 (sum eta q)^2 / sum (gamma_A + eta) q].
    """
    lam, p = np.linalg.eigh(model.Gamma)
    eta = model.gamma_P + 1.0 / lam
    q = np.diag(p.T @ model.gram @ p)
    den = float(np.sum((model.gamma_A + eta) * q))
    if den <= _ENERGY_FLOOR:
        return 0.0
    term1 = float(np.sum(eta * eta * q / (model.gamma_A + eta)))
    term2 = float(np.sum(eta * q)) ** 2 / den
    return 0.5 * model.gamma_P * (term1 - term2)


def voi_upper_bound(model: AgencyModel) -> float:
    """Eigenvalue-spread bound dominating chi0 - phi0."""
    lam = np.linalg.eigvalsh(model.Gamma)
    eta = model.gamma_P + 1.0 / lam
    eta_min, eta_max = float(np.min(eta)), float(np.max(eta))
    spread = (eta_max * eta_max / (model.gamma_A + eta_min)
              - eta_min * eta_min / (model.gamma_A + eta_max))
    return 0.5 * model.gamma_P * spread * model.kernel_energy()


def _integral_dual_cost_beta_star(model: AgencyModel) -> float:
    # integral of f*(beta*) via the Gram identity: beta* = W K(T,.)
    m = model.gamma_A * np.eye(model.dim) - model.Gamma_inv
    w = model._W
    return 0.5 * float(np.trace(w @ m @ w @ model.gram))


def optimal_contract_1d(model: AgencyModel) -> ContractQuote:
    """Optimal pay rule intercept + slope * X_T for scalar effort.

    The slope depends only on preferences and kappa, never on the
    kernel; the intercept pins the agent at the reservation certainty
    equivalent y0.
    """
    if model.dim != 1:
        raise ValueError(f"1-d contract requires a 1-d model, got dim={model.dim}")
    kappa = model.kappa
    slope = (model.gamma_P + 1.0 / kappa) / (
        model.gamma_A + model.gamma_P + 1.0 / kappa)
    energy = model.kernel_energy()
    degenerate = energy <= _ENERGY_FLOOR
    integral_term = ((kappa * model.gamma_A - 1.0) / (2.0 * kappa)
                     * slope * slope * energy)
    g0_T = model.g0_terminal()
    intercept = model.y0 - slope * g0_T + integral_term
    phi = phi0(model)
    chi = phi if degenerate else chi0(model)
    shift = -model.gamma_P * (g0_T - model.y0)
    return ContractQuote(
        slope=slope,
        intercept=intercept,
        integral_term=integral_term,
        beta_star=optimal_effort(model),
        phi0=phi,
        chi0=chi,
        V_SB=-math.exp(shift + phi),
        V_lin=-math.exp(shift + chi),
        voi=min(1.0, math.exp(phi - chi)),
        agent_value=-math.exp(-model.gamma_A * model.y0),
        degenerate=degenerate,
    )


def contract_quote(model: AgencyModel) -> ContractQuote:
    """Second-best summary for any dimension.

    In 1-d the linear contract is exactly optimal. In higher dimension
    the quoted pay rule is the best linear one (slope b*, participation
    binding) while phi0 / V_SB still report the unrestricted optimum.
    """
    if model.dim == 1:
        return optimal_contract_1d(model)
    g0_T = model.g0_terminal()
    shift = -model.gamma_P * (g0_T - model.y0)
    phi = phi0(model)
    try:
        b = optimal_linear_slope(model)
    except DegenerateModelError:
        return ContractQuote(
            slope=0.0, intercept=model.y0, integral_term=0.0,
            beta_star=optimal_effort(model), phi0=phi, chi0=phi,
            V_SB=-math.exp(shift + phi), V_lin=-math.exp(shift + phi),
            voi=1.0, agent_value=-math.exp(-model.gamma_A * model.y0),
            degenerate=True,
        )
    chi = chi0(model)
    m = model.gamma_A * np.eye(model.dim) - model.Gamma_inv
    # intercept makes the agent's certainty equivalent equal y0 under the
    # linear pay rule: integral of f*(b K) equals (b^2/2) tr(M G)
    intercept = (model.y0 - b * g0_T
                 + 0.5 * b * b * float(np.trace(m @ model.gram)))
    return ContractQuote(
        slope=b,
        intercept=intercept,
        integral_term=_integral_dual_cost_beta_star(model),
        beta_star=optimal_effort(model),
        phi0=phi,
        chi0=chi,
        V_SB=-math.exp(shift + phi),
        V_lin=-math.exp(shift + chi),
        voi=min(1.0, math.exp(phi - chi)),
        agent_value=-math.exp(-model.gamma_A * model.y0),
        degenerate=False,
    )


SWEEP_COLUMNS = ("T", "p1", "p2", "phi0", "chi0", "b_star", "voi",
                 "gap", "l2_1", "l2_2")

_SWEEP_FAMILIES = ("exponential", "fractional", "constant")


@dataclass(frozen=True)
class SweepGrid:
    """Two-component parameter grid for value-of-information sweeps.

    family picks the kernel pair: "exponential" (mean reversions
    p1, p2), "fractional" (Hurst exponents), or "constant"
    (volatilities). Effort cost is Gamma = diag(cost_diag).
    """

    family: str
    T_values: Sequence[float]
    p1_values: Sequence[float]
    p2_values: Sequence[float]
    gamma_A: float = 1.0
    gamma_P: float = 1.0
    cost_diag: Sequence[float] = (1.0, 2.0)
    y0: float = 0.0
    rule: QuadratureRule = DEFAULT_RULE

    def __post_init__(self):
        if self.family not in _SWEEP_FAMILIES:
            raise ValueError(
                f"family={self.family!r} must be one of {_SWEEP_FAMILIES}"
            )
        if len(self.cost_diag) != 2:
            raise ValueError("cost_diag must have exactly two entries")
        for name in ("T_values", "p1_values", "p2_values"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")

    def kernel(self, p1: float, p2: float) -> VolterraKernel:
        if self.family == "exponential":
            return make_exponential([p1, p2])
        if self.family == "constant":
            return make_constant([p1, p2])
        return make_riemann_liouville(
            (FractionalParams(p1), FractionalParams(p2)))


def voi_sweep(grid: SweepGrid) -> list[dict]:
    """Sweep rows in deterministic (T, p1, p2) order; keys SWEEP_COLUMNS."""
    gamma = np.diag(np.asarray(grid.cost_diag, dtype=float))
    rows = []
    for T in grid.T_values:
        for p1 in grid.p1_values:
            for p2 in grid.p2_values:
                model = AgencyModel(
                    gamma_A=grid.gamma_A, gamma_P=grid.gamma_P,
                    cost=gamma, kernel=grid.kernel(p1, p2),
                    T=float(T), y0=grid.y0, rule=grid.rule,
                )
                phi = phi0(model)
                chi = chi0(model)
                rows.append({
                    "T": float(T), "p1": float(p1), "p2": float(p2),
                    "phi0": phi, "chi0": chi,
                    "b_star": optimal_linear_slope(model),
                    "voi": min(1.0, math.exp(phi - chi)),
                    "gap": chi - phi,
                    "l2_1": float(model.gram[0, 0]),
                    "l2_2": float(model.gram[1, 1]),
                })
    return rows
