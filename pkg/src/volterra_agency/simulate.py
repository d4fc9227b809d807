"""Monte Carlo sampling and martingale diagnostics.

Paths are driven by a counter-based Philox generator keyed by
(seed, path index), so results are bit-identical however the path loop
is chunked. All stochastic integrals use left-endpoint sums; the
deterministic pieces inside the martingale diagnostic use the same
left-point rule, which makes the discretized value process an exact
martingale at the optimal sensitivity and leaves only sampling noise in
the flatness checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contracts import AgencyModel, EffortPolicy, agent_best_response
from .quadrature import segment_nodes

__all__ = [
    "SimulationConfig",
    "TerminalSample",
    "PathBundle",
    "MartingaleReport",
    "OutputPaths",
    "sample_terminal",
    "simulate_paths",
    "martingale_diagnostic",
    "sample_output_path",
]

_CHUNK = 4096
_EXP_CAP = 700.0  # exp overflow threshold for float64
_SCHEMES = ("terminal-exact", "euler-path")


@dataclass(frozen=True)
class SimulationConfig:
    n_paths: int
    n_steps: int
    seed: int
    scheme: str = "terminal-exact"

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be >= 1")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme={self.scheme!r} must be one of {_SCHEMES}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class TerminalSample:
    """Samples of the terminal pair under the best response to beta."""

    x: np.ndarray
    y: np.ndarray
    mean_x: float
    mean_y: float


@dataclass(frozen=True)
class PathBundle:
    """Euler paths of the forward output, contract value and martingale."""

    times: np.ndarray
    forward_output: np.ndarray
    y_process: np.ndarray
    m_process: np.ndarray
    terminal_x: np.ndarray


@dataclass(frozen=True)
class MartingaleReport:
    """Checkpoint means of the value martingale with 3-sigma verdicts."""

    times: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    initial: float
    drift_estimate: float
    drift_stderr: float
    within_bands: np.ndarray
    side: str
    n_paths: int


@dataclass(frozen=True)
class OutputPaths:
    times: np.ndarray
    paths: np.ndarray


def _path_generator(seed: int, path: int) -> np.random.Generator:
    key = np.array([int(seed), int(path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _objective_nodes(model: AgencyModel):
    k = model.kernel
    return segment_nodes(0.0, model.T, model.rule,
                         q_lower=2.0 * min(k.origin_powers),
                         q_upper=2.0 * min(k.end_powers))


def _grid(model: AgencyModel, cfg: SimulationConfig) -> np.ndarray:
    times = np.linspace(0.0, model.T, cfg.n_steps + 1)
    if model.kernel.label == "discrete":
        dt = model.T / cfg.n_steps
        for t_obs in model.kernel.params["times"]:
            if abs(t_obs / dt - round(t_obs / dt)) > 1e-9:
                raise ValueError(
                    f"n_steps={cfg.n_steps} does not resolve the observation "
                    f"time {t_obs!r} on the grid"
                )
    return times


def _kernel_rows(model: AgencyModel, s: np.ndarray) -> np.ndarray:
    rows = np.asarray(model.kernel.slice_at(model.T)(s), dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    return rows


def _fsum(parts) -> float:
    return math.fsum(parts)


def _resolve_effort(model: AgencyModel, beta: EffortPolicy,
                    effort: EffortPolicy | None) -> EffortPolicy:
    if effort is None:
        return agent_best_response(beta, model)
    if effort.dim != model.dim:
        raise ValueError("effort dim does not match the model")
    return effort


def sample_terminal(model: AgencyModel, beta: EffortPolicy, y: float,
                    cfg: SimulationConfig) -> TerminalSample:
    """Draw (X_T, Y_T) under the best response to the sensitivity beta.

    terminal-exact draws the jointly Gaussian pair from its quadrature
    covariance; euler-path builds both coordinates from shared
    left-point increments.
    """
    if beta.dim != model.dim:
        raise ValueError("beta dim does not match the model")
    gamma_pen = model.gamma_A * np.eye(model.dim) + model.Gamma_inv
    if cfg.scheme == "terminal-exact":
        x_nodes, w = _objective_nodes(model)
        kv = _kernel_rows(model, x_nodes)
        bv = beta.beta_at(x_nodes)
        mean_x = model.g0_terminal() + _fsum(
            (np.sum(kv * (bv @ model.Gamma_inv.T), axis=1) * w).tolist())
        mean_y = y + 0.5 * _fsum(
            (np.sum(bv * (bv @ gamma_pen.T), axis=1) * w).tolist())
        var_x = _fsum((np.sum(kv * kv, axis=1) * w).tolist())
        var_y = _fsum((np.sum(bv * bv, axis=1) * w).tolist())
        cov = _fsum((np.sum(kv * bv, axis=1) * w).tolist())
        cmat = np.array([[var_x, cov], [cov, var_y]])
        try:
            chol = np.linalg.cholesky(cmat)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * max(1.0, float(np.trace(cmat)))
            try:
                chol = np.linalg.cholesky(cmat + jitter * np.eye(2))
            except np.linalg.LinAlgError:
                raise RuntimeError(
                    f"terminal covariance {cmat.tolist()} is not positive "
                    f"semidefinite after jitter {jitter:.1e}"
                ) from None
        z = np.stack([_path_generator(cfg.seed, p).standard_normal(2)
                      for p in range(cfg.n_paths)])
        draws = z @ chol.T
        return TerminalSample(x=mean_x + draws[:, 0], y=mean_y + draws[:, 1],
                              mean_x=mean_x, mean_y=mean_y)

    times = _grid(model, cfg)
    dt = times[1] - times[0]
    left = times[:-1]
    kv = _kernel_rows(model, left)
    bv = beta.beta_at(left)
    av = bv @ model.Gamma_inv.T
    mean_x = model.g0_terminal() + float(np.sum(kv * av)) * dt
    mean_y = y + 0.5 * float(np.sum(bv * (bv @ gamma_pen.T))) * dt
    sq = math.sqrt(dt)
    xs = np.empty(cfg.n_paths)
    ys = np.empty(cfg.n_paths)
    for start in range(0, cfg.n_paths, _CHUNK):
        stop = min(start + _CHUNK, cfg.n_paths)
        z = np.stack([
            _path_generator(cfg.seed, p).standard_normal((cfg.n_steps,
                                                          model.dim))
            for p in range(start, stop)]) * sq
        xs[start:stop] = mean_x + np.einsum("pnd,nd->p", z, kv)
        ys[start:stop] = mean_y + np.einsum("pnd,nd->p", z, bv)
    return TerminalSample(x=xs, y=ys, mean_x=mean_x, mean_y=mean_y)


def _phi_bracket(model: AgencyModel, variant: str) -> np.ndarray:
    a = model.gamma_P * np.eye(model.dim) + model.Gamma_inv
    s = model.gamma_A * np.eye(model.dim) + a
    lead = model.gamma_P if variant == "adopted" else model.gamma_P ** 2
    bracket = lead * np.eye(model.dim) - a @ np.linalg.solve(s, a)
    return 0.5 * (bracket + bracket.T)


def _diagnostic_pieces(model: AgencyModel, beta: EffortPolicy,
                       effort: EffortPolicy, times: np.ndarray,
                       phi_variant: str):
    """Left-point deterministic ingredients shared by the path simulators."""
    if phi_variant not in ("adopted", "one_d_text"):
        raise ValueError(f"unknown phi_variant {phi_variant!r}")
    dt = times[1] - times[0]
    left = times[:-1]
    kv = _kernel_rows(model, left)
    bv = beta.beta_at(left)
    av = effort.effort_at(left)
    gamma_pen = model.gamma_A * np.eye(model.dim) + model.Gamma_inv
    best = bv @ model.Gamma_inv.T
    # Y drift per step under the simulated effort measure
    y_drift = (0.5 * np.sum(bv * (bv @ gamma_pen.T), axis=1)
               + np.sum(bv * (av - best), axis=1)) * dt
    cost = 0.5 * np.sum(av * (av @ model.Gamma.T), axis=1) * dt
    # the forward output accrues effort drift only up to the current time,
    # so its t=0 value is the plain input curve terminal value
    g_drift = np.sum(kv * av, axis=1) * dt
    bracket = _phi_bracket(model, phi_variant)
    phi_steps = 0.5 * model.gamma_P * np.sum(kv * (kv @ bracket.T), axis=1) * dt
    # phi at grid point i is the tail sum over steps i..n-1
    phi_grid = np.concatenate([np.cumsum(phi_steps[::-1])[::-1], [0.0]])
    return dt, left, kv, bv, y_drift, cost, g_drift, phi_grid


def simulate_paths(model: AgencyModel, beta: EffortPolicy, y: float,
                   cfg: SimulationConfig, effort: EffortPolicy | None = None,
                   phi_variant: str = "adopted") -> PathBundle:
    """Full euler paths of (g_t(T), Y_t, M_t); memory scales with n_paths*n_steps."""
    if cfg.scheme != "euler-path":
        raise ValueError("path simulation requires the euler-path scheme")
    effort = _resolve_effort(model, beta, effort)
    times = _grid(model, cfg)
    dt, left, kv, bv, y_drift, cost, g_drift, phi_grid = _diagnostic_pieces(
        model, beta, effort, times, phi_variant)
    sq = math.sqrt(dt)
    n = cfg.n_paths
    z = np.stack([
        _path_generator(cfg.seed, p).standard_normal((cfg.n_steps, model.dim))
        for p in range(n)]) * sq
    g0T = model.g0_terminal()
    g_det = np.concatenate([[0.0], np.cumsum(g_drift)])
    inc_g = np.einsum("pnd,nd->pn", z, kv)
    inc_y = np.einsum("pnd,nd->pn", z, bv)
    zero = np.zeros((n, 1))
    forward = g0T + g_det[None, :] + np.hstack([zero,
                                                np.cumsum(inc_g, axis=1)])
    y_proc = y + np.hstack([zero, np.cumsum(y_drift + inc_y, axis=1)])
    # independent reduction order for the terminal identity check
    terminal_x = g0T + g_det[-1] + np.einsum("pnd,nd->p", z, kv)
    arg = -model.gamma_P * (forward - y_proc) + phi_grid[None, :]
    if float(np.max(arg)) > _EXP_CAP:
        bad = np.argwhere(arg > _EXP_CAP)[0]
        raise RuntimeError(
            f"martingale exponent overflow on path {int(bad[0])} at step "
            f"{int(bad[1])}; consider rescaling the risk aversions"
        )
    return PathBundle(times=times, forward_output=forward, y_process=y_proc,
                      m_process=np.exp(arg), terminal_x=terminal_x)


def martingale_diagnostic(model: AgencyModel, beta: EffortPolicy, y: float,
                          cfg: SimulationConfig, checkpoints,
                          side: str = "principal",
                          effort: EffortPolicy | None = None,
                          phi_variant: str = "adopted") -> MartingaleReport:
    """Checkpoint flatness test of the value martingale.

    side "principal" tracks M_t = exp(-gamma_P (g_t(T) - Y_t) + phi_t);
    side "agent" tracks R_t = -exp(-gamma_A (Y_t - incurred cost)) under
    the supplied effort (best response by default). Means are reported
    with standard errors and a drift estimate over the checkpoint span.
    """
    if side not in ("principal", "agent"):
        raise ValueError(f"side={side!r} must be 'principal' or 'agent'")
    if cfg.scheme != "euler-path":
        raise ValueError("the diagnostic requires the euler-path scheme")
    effort = _resolve_effort(model, beta, effort)
    times = _grid(model, cfg)
    cps = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if cps.size == 0:
        raise ValueError("checkpoints must be non-empty")
    dt = times[1] - times[0]
    idx = np.round(cps / dt).astype(int)
    if np.any(idx < 0) or np.any(idx > cfg.n_steps) or \
            np.any(np.abs(idx * dt - cps) > 1e-9 * max(1.0, model.T)):
        raise ValueError("checkpoints must be grid times within [0, T]")
    dt, left, kv, bv, y_drift, cost, g_drift, phi_grid = _diagnostic_pieces(
        model, beta, effort, times, phi_variant)
    sq = math.sqrt(dt)
    g0T = model.g0_terminal()
    g_det = np.concatenate([[0.0], np.cumsum(g_drift)])
    y_det = np.concatenate([[0.0], np.cumsum(y_drift)])
    cost_cum = np.concatenate([[0.0], np.cumsum(cost)])
    if side == "principal":
        arg0 = -model.gamma_P * (g0T - y) + phi_grid[0]
    else:
        arg0 = -model.gamma_A * y
    if arg0 > _EXP_CAP:
        raise RuntimeError(
            "martingale exponent overflow at t=0; consider rescaling the "
            "risk aversions"
        )
    initial = math.exp(arg0) if side == "principal" else -math.exp(arg0)

    col = idx  # checkpoint columns into the cumulative arrays
    sums, sumsqs, dsums, dsumsqs = [], [], [], []
    for start in range(0, cfg.n_paths, _CHUNK):
        stop = min(start + _CHUNK, cfg.n_paths)
        z = np.stack([
            _path_generator(cfg.seed, p).standard_normal((cfg.n_steps,
                                                          model.dim))
            for p in range(start, stop)]) * sq
        inc_y = np.einsum("pnd,nd->pn", z, bv)
        zero = np.zeros((stop - start, 1))
        y_path = y + y_det[None, :] + np.hstack([zero,
                                                 np.cumsum(inc_y, axis=1)])
        if side == "principal":
            inc_g = np.einsum("pnd,nd->pn", z, kv)
            forward = g0T + g_det[None, :] + np.hstack([
                zero, np.cumsum(inc_g, axis=1)])
            arg = (-model.gamma_P * (forward[:, col] - y_path[:, col])
                   + phi_grid[None, col])
            sign = 1.0
        else:
            arg = -model.gamma_A * (y_path[:, col] - cost_cum[None, col])
            sign = -1.0
        if float(np.max(arg)) > _EXP_CAP:
            bad = np.argwhere(arg > _EXP_CAP)[0]
            raise RuntimeError(
                f"martingale exponent overflow on path {start + int(bad[0])}; "
                f"consider rescaling the risk aversions"
            )
        m_cp = sign * np.exp(arg)
        sums.append(np.sum(m_cp, axis=0))
        sumsqs.append(np.sum(m_cp * m_cp, axis=0))
        diff = m_cp[:, -1] - m_cp[:, 0]
        dsums.append(float(np.sum(diff)))
        dsumsqs.append(float(np.sum(diff * diff)))

    n = cfg.n_paths
    means = np.array([_fsum([s[j] for s in sums]) for j in range(col.size)]) / n
    sq_tot = np.array([_fsum([s[j] for s in sumsqs]) for j in range(col.size)])
    if n > 1:
        variances = np.maximum(sq_tot - n * means ** 2, 0.0) / (n - 1)
    else:
        variances = np.zeros(col.size)
    stderrs = np.sqrt(variances / n)
    span = float(cps[-1] - cps[0])
    d_mean = _fsum(dsums) / n
    if n > 1:
        d_var = max(_fsum(dsumsqs) - n * d_mean ** 2, 0.0) / (n - 1)
    else:
        d_var = 0.0
    if span > 0.0:
        drift_estimate = d_mean / span
        drift_stderr = math.sqrt(d_var / n) / span
    else:
        drift_estimate = 0.0
        drift_stderr = 0.0
    within = np.abs(means - initial) <= 3.0 * stderrs + 1e-15
    return MartingaleReport(times=cps, means=means, stderrs=stderrs,
                            initial=initial, drift_estimate=drift_estimate,
                            drift_stderr=drift_stderr, within_bands=within,
                            side=side, n_paths=n)


def sample_output_path(model: AgencyModel, cfg: SimulationConfig) -> OutputPaths:
    """Zero-effort Gaussian paths of X_t on the simulation grid.

    The grid covariance C(t_i, t_j) accumulates cell-by-cell from shared
    per-cell Gauss nodes, then a jittered Cholesky factor drives the
    draws.
    """
    times = _grid(model, cfg)
    n_grid = times.size
    per_cell = 6
    gl_x, gl_w = np.polynomial.legendre.leggauss(per_cell)
    cov = np.zeros((n_grid, n_grid))
    for c in range(cfg.n_steps):
        a, b = times[c], times[c + 1]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        xs = mid + half * gl_x
        ws = half * gl_w
        rows = np.stack([_slice_rows(model, times[i], xs)
                         for i in range(c + 1, n_grid)])
        # rows: (n_grid - c - 1, per_cell, d); the cell contributes to all
        # pairs (i, j) with i, j > c
        contrib = np.einsum("imd,jmd,m->ij", rows, rows, ws)
        cov[c + 1:, c + 1:] += contrib
    chol = None
    scale = max(float(np.max(np.diag(cov))), 1e-30)
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            chol = np.linalg.cholesky(cov + jitter * scale * np.eye(n_grid))
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        eigs = np.linalg.eigvalsh(cov)
        raise RuntimeError(
            f"path covariance factorization failed; eigenvalue range "
            f"[{eigs[0]:.3e}, {eigs[-1]:.3e}] after jitter 1e-10"
        )
    g0_vals = np.array([model.input_curve(t) for t in times], dtype=float)
    paths = np.empty((cfg.n_paths, n_grid))
    for start in range(0, cfg.n_paths, _CHUNK):
        stop = min(start + _CHUNK, cfg.n_paths)
        z = np.stack([_path_generator(cfg.seed, p).standard_normal(n_grid)
                      for p in range(start, stop)])
        paths[start:stop] = g0_vals[None, :] + z @ chol.T
    return OutputPaths(times=times, paths=paths)


def _slice_rows(model: AgencyModel, t: float, s: np.ndarray) -> np.ndarray:
    rows = np.asarray(model.kernel.slice_at(t)(s), dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    return rows
