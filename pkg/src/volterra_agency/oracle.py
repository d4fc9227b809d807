"""Exact-Gaussian evaluation of principal and agent objectives.

For any deterministic sensitivity path beta, the terminal pair
(X_T, Y_T) is jointly Gaussian, so both expected utilities collapse to
one-dimensional integrals of explicit quadratic integrands. This module
evaluates those integrals directly from kernel and policy samples,
sharing no algebra with the contracts module, and runs brute-force
optimizers over discretized controls. Agreement between the two routes
is what validates the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .contracts import AgencyModel, EffortPolicy
from .quadrature import QuadratureRule, segment_nodes

__all__ = [
    "ObjectiveEvaluation",
    "SlopeScan",
    "PiecewiseObjective",
    "ConvergenceError",
    "principal_objective",
    "agent_certainty_equivalent",
    "brute_force_slope",
    "brute_force_effort",
]

_ENERGY_FLOOR = 1e-13
_IMPROVE_TOL = 1e-10
# loose enough to sit above the rounding floor of the quadratic exponent,
# tight enough that the distance to the exact minimizer stays below the
# brute-force comparison tolerances
_GRAD_TOL = 1e-7
_MAX_ITERATIONS = 10 ** 5


class ConvergenceError(ArithmeticError):
    """Gradient ascent failed to converge within the iteration budget."""

    def __init__(self, iterations: int, gradient_norm: float):
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        super().__init__(
            f"no convergence after {iterations} iterations; "
            f"last gradient norm {gradient_norm:.3e}"
        )


@dataclass(frozen=True)
class ObjectiveEvaluation:
    """Gaussian functionals of a deterministic control.

    value = -exp(-gamma_P * mean + gamma_P^2 * variance / 2), the
    principal's expected utility when X_T - Y_T is Gaussian with these
    moments.
    """

    mean: float
    variance: float
    value: float


def _objective_nodes(model: AgencyModel):
    # node placement follows the kernel's endpoint powers; squares of the
    # kernel appear in every integrand, hence the factor two
    k = model.kernel
    return segment_nodes(
        0.0, model.T, model.rule,
        q_lower=2.0 * min(k.origin_powers),
        q_upper=2.0 * min(k.end_powers),
    )


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def principal_objective(y: float, beta: EffortPolicy,
                        model: AgencyModel) -> ObjectiveEvaluation:
    """Expected principal utility -E[exp(-gamma_P (X_T - Y_T))] at (y, beta).

    mean = g0(T) - y + integral of <K, Gamma^-1 beta> - <beta, (gamma_A I
    + Gamma^-1) beta>/2; variance = integral of |K - beta|^2.
    """
    if beta.dim != model.dim:
        raise ValueError(
            f"policy dim {beta.dim} does not match model dim {model.dim}"
        )
    x, w = _objective_nodes(model)
    kv = np.asarray(model.kernel.slice_at(model.T)(x), dtype=float)
    if kv.ndim == 1:
        kv = kv[:, None]
    bv = beta.beta_at(x)
    g_inv = model.Gamma_inv
    drift = np.sum(kv * (bv @ g_inv.T), axis=1)
    m_pen = model.gamma_A * np.eye(model.dim) + g_inv
    penalty = 0.5 * np.sum(bv * (bv @ m_pen.T), axis=1)
    mean = model.g0_terminal() - y + _fsum((drift - penalty) * w)
    variance = _fsum(np.sum((kv - bv) ** 2, axis=1) * w)
    value = -math.exp(-model.gamma_P * mean
                      + 0.5 * model.gamma_P ** 2 * variance)
    return ObjectiveEvaluation(mean=mean, variance=variance, value=value)


def agent_certainty_equivalent(y: float, beta: EffortPolicy, a: EffortPolicy,
                               model: AgencyModel) -> float:
    """Agent certainty equivalent under contract (y, beta) and effort a.

    The integrand is combined pointwise, so at the best response
    a = Gamma^-1 beta it vanishes node by node and CE equals y to
    rounding, not merely to quadrature accuracy.
    """
    if beta.dim != model.dim or a.dim != model.dim:
        raise ValueError("policy dims must match the model dim")
    x, w = _objective_nodes(model)
    bv = beta.beta_at(x)
    av = a.effort_at(x)
    gamma = model.Gamma
    g_inv = model.Gamma_inv
    dual = model.gamma_A * np.eye(model.dim) - g_inv
    # f*(beta) + <beta, a> - <a, Gamma a>/2 - (gamma_A/2)|beta|^2 per node
    integrand = (0.5 * np.sum(bv * (bv @ dual.T), axis=1)
                 + np.sum(bv * av, axis=1)
                 - 0.5 * np.sum(av * (av @ gamma.T), axis=1)
                 - 0.5 * model.gamma_A * np.sum(bv * bv, axis=1))
    return y + _fsum(integrand * w)


@dataclass(frozen=True)
class SlopeScan:
    """Result of a linear-contract slope scan; iterates as (b_best, values)."""

    b_best: float
    values: tuple
    degenerate: bool = False

    def __iter__(self):
        return iter((self.b_best, self.values))


def brute_force_slope(y: float, model: AgencyModel, grid) -> SlopeScan:
    """Principal objective along beta = b K(T, .) for every b in grid.

    Returns the maximizing b and the full evaluation table. A kernel
    with no L2 energy yields a flat table, reported with the degeneracy
    flag and the smallest grid value as argmax.
    """
    bs = np.atleast_1d(np.asarray(grid, dtype=float))
    if bs.size == 0:
        raise ValueError("slope grid must be non-empty")
    x, w = _objective_nodes(model)
    kv = np.asarray(model.kernel.slice_at(model.T)(x), dtype=float)
    if kv.ndim == 1:
        kv = kv[:, None]
    g_inv = model.Gamma_inv
    m_pen = model.gamma_A * np.eye(model.dim) + g_inv
    # with beta = b K the mean is linear-quadratic in b and the variance
    # is (1-b)^2 times the kernel energy
    i_drift = _fsum(np.sum(kv * (kv @ g_inv.T), axis=1) * w)
    i_pen = _fsum(0.5 * np.sum(kv * (kv @ m_pen.T), axis=1) * w)
    energy = _fsum(np.sum(kv * kv, axis=1) * w)
    base = model.g0_terminal() - y
    evals = []
    for b in bs:
        mean = base + b * i_drift - b * b * i_pen
        variance = (1.0 - b) ** 2 * energy
        value = -math.exp(-model.gamma_P * mean
                          + 0.5 * model.gamma_P ** 2 * variance)
        evals.append(ObjectiveEvaluation(mean=mean, variance=variance,
                                         value=value))
    degenerate = energy <= _ENERGY_FLOOR
    if degenerate:
        b_best = float(np.min(bs))
    else:
        b_best = float(bs[int(np.argmax([e.value for e in evals]))])
    return SlopeScan(b_best=b_best, values=tuple(evals), degenerate=degenerate)


class PiecewiseObjective:
    """Principal exponent restricted to piecewise-constant sensitivities.

    Pieces are uniform on [0, T]. The exponent -gamma_P m + gamma_P^2
    v / 2 is a positive-definite quadratic in the stacked coefficients,
    with per-piece kernel means as the only model input.
    """

    def __init__(self, y: float, model: AgencyModel, n_pieces: int):
        if n_pieces < 1:
            raise ValueError("n_pieces must be >= 1")
        self.model = model
        self.y = float(y)
        self.edges = np.linspace(0.0, model.T, n_pieces + 1)
        self.n_pieces = n_pieces
        d = model.dim
        rule = QuadratureRule(
            n_panels=max(4, model.rule.n_panels // n_pieces + 1),
            nodes_per_panel=model.rule.nodes_per_panel,
        )
        k_slice = model.kernel.slice_at(model.T)
        means = np.empty((n_pieces, d))
        for j in range(n_pieces):
            x, w = segment_nodes(
                self.edges[j], self.edges[j + 1], rule,
                q_lower=min(model.kernel.origin_powers) if j == 0 else 0.0,
                q_upper=min(model.kernel.end_powers) if j == n_pieces - 1 else 0.0,
            )
            kv = np.asarray(k_slice(x), dtype=float)
            if kv.ndim == 1:
                kv = kv[:, None]
            means[j] = kv.T @ w
        self.kernel_means = means
        x, w = _objective_nodes(model)
        kv = np.asarray(k_slice(x), dtype=float)
        if kv.ndim == 1:
            kv = kv[:, None]
        self.energy = _fsum(np.sum(kv * kv, axis=1) * w)
        self.delta = float(model.T / n_pieces)

    @cached_property
    def _pen(self) -> np.ndarray:
        m = self.model
        return m.gamma_A * np.eye(m.dim) + m.Gamma_inv

    @cached_property
    def _hess_block(self) -> np.ndarray:
        # per-piece Hessian of the exponent: gamma_P delta S with
        # S = (gamma_A + gamma_P) I + Gamma^-1
        m = self.model
        s = (m.gamma_A + m.gamma_P) * np.eye(m.dim) + m.Gamma_inv
        return m.gamma_P * self.delta * s

    def exponent(self, betas: np.ndarray) -> float:
        """-gamma_P m(beta) + gamma_P^2 v(beta) / 2 for piece values (n, d)."""
        b = np.asarray(betas, dtype=float).reshape(self.n_pieces, -1)
        m = self.model
        drift = float(np.sum(self.kernel_means * (b @ m.Gamma_inv.T)))
        penalty = 0.5 * self.delta * float(np.sum(b * (b @ self._pen.T)))
        mean = m.g0_terminal() - self.y + drift - penalty
        variance = (self.energy - 2.0 * float(np.sum(self.kernel_means * b))
                    + self.delta * float(np.sum(b * b)))
        return -m.gamma_P * mean + 0.5 * m.gamma_P ** 2 * variance

    def evaluation(self, betas: np.ndarray) -> ObjectiveEvaluation:
        b = np.asarray(betas, dtype=float).reshape(self.n_pieces, -1)
        m = self.model
        drift = float(np.sum(self.kernel_means * (b @ m.Gamma_inv.T)))
        penalty = 0.5 * self.delta * float(np.sum(b * (b @ self._pen.T)))
        mean = m.g0_terminal() - self.y + drift - penalty
        variance = (self.energy - 2.0 * float(np.sum(self.kernel_means * b))
                    + self.delta * float(np.sum(b * b)))
        return ObjectiveEvaluation(
            mean=mean, variance=variance,
            value=-math.exp(-m.gamma_P * mean
                            + 0.5 * m.gamma_P ** 2 * variance))

    def gradient(self, betas: np.ndarray) -> np.ndarray:
        b = np.asarray(betas, dtype=float).reshape(self.n_pieces, -1)
        m = self.model
        grad_mean = self.kernel_means @ m.Gamma_inv.T - self.delta * (b @ self._pen.T)
        grad_var = -2.0 * self.kernel_means + 2.0 * self.delta * b
        return -m.gamma_P * grad_mean + 0.5 * m.gamma_P ** 2 * grad_var

    def optimal_projection(self) -> np.ndarray:
        """Exact minimizer: L2 projection of beta* onto the pieces."""
        m = self.model
        a = m.gamma_P * np.eye(m.dim) + m.Gamma_inv
        s = m.gamma_A * np.eye(m.dim) + a
        avg = self.kernel_means / self.delta
        return np.linalg.solve(s, a @ avg.T).T

    def policy(self, betas: np.ndarray) -> EffortPolicy:
        """Piecewise-constant EffortPolicy holding these piece values."""
        b = np.asarray(betas, dtype=float).reshape(self.n_pieces, -1).copy()
        edges = self.edges
        g_inv = self.model.Gamma_inv

        def beta_fn(t: float) -> np.ndarray:
            j = min(max(int(np.searchsorted(edges, t, side="right")) - 1, 0),
                    b.shape[0] - 1)
            return b[j]

        mids = 0.5 * (edges[:-1] + edges[1:])
        return EffortPolicy(grid=mids, beta=b, effort=b @ g_inv.T,
                            beta_fn=beta_fn,
                            effort_fn=lambda t: g_inv @ beta_fn(t))


def brute_force_effort(y: float, model: AgencyModel,
                       n_pieces: int) -> EffortPolicy:
    """Maximize the principal objective over piecewise-constant beta.

    Gradient descent on the quadratic exponent with backtracking from
    the exact quadratic step; stops once the improvement drops below
    1e-10 with the gradient flat, and reports the last gradient norm if
    the iteration budget runs out.
    """
    obj = PiecewiseObjective(y, model, n_pieces)
    b = np.zeros((obj.n_pieces, model.dim))
    f = obj.exponent(b)
    for it in range(1, _MAX_ITERATIONS + 1):
        g = obj.gradient(b)
        grad_norm = float(np.max(np.abs(g)))
        if grad_norm <= _GRAD_TOL:
            return obj.policy(b)
        hg = g @ obj._hess_block.T
        step = float(np.sum(g * g)) / float(np.sum(g * hg))
        improved = False
        for _ in range(60):
            trial = b - step * g
            f_trial = obj.exponent(trial)
            if f_trial < f:
                improved = True
                break
            step *= 0.5
        if not improved:
            # line search hit the rounding floor of the exponent while the
            # gradient is still above tolerance
            raise ConvergenceError(it, grad_norm)
        gain = f - f_trial
        b, f = trial, f_trial
        if gain < _IMPROVE_TOL and grad_norm <= _GRAD_TOL:
            return obj.policy(b)
    raise ConvergenceError(_MAX_ITERATIONS, grad_norm)
