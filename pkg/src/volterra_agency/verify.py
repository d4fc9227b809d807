"""Scenario-scoped verification suite.

Runs the cross-module consistency checks against one scenario and
reports a verdict per check. Checks never abort the suite: any
exception is converted into a failing record carrying the message.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contracts import (
    AgencyModel,
    EffortPolicy,
    contract_quote,
    optimal_effort,
    phi0,
    chi0,
    principal_value_sb,
    voi_spectral,
    voi_upper_bound,
)
from .oracle import (
    PiecewiseObjective,
    agent_certainty_equivalent,
    brute_force_slope,
    principal_objective,
)
from .simulate import SimulationConfig, martingale_diagnostic, sample_terminal

__all__ = ["CheckResult", "verify_scenario"]

# piecewise resolution for the stationarity probe; coarse is fine since
# only the gradient at the projection is interrogated, not the sup error
_STATIONARITY_PIECES = 32
_GAP_TOL = 1e-12


@dataclass(frozen=True)
class CheckResult:
    check: str
    status: str                  # "pass" or "fail"
    statistic: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        def clean(x):
            return x if math.isfinite(x) else None

        out = {"check": self.check, "status": self.status,
               "statistic": clean(self.statistic),
               "tolerance": clean(self.tolerance)}
        if self.detail:
            out["detail"] = self.detail
        return out


def _result(check: str, statistic: float, tolerance: float,
            detail: str = "") -> CheckResult:
    ok = math.isfinite(statistic) and statistic <= tolerance
    return CheckResult(check=check, status="pass" if ok else "fail",
                       statistic=float(statistic), tolerance=float(tolerance),
                       detail=detail)


def _offset_policy(model: AgencyModel, offset: float) -> EffortPolicy:
    """beta* with a slope corruption: beta = (W + offset I) K(T, .)."""
    base = optimal_effort(model)
    if offset == 0.0:
        return base
    kt = model.kernel.slice_at(model.T)
    kv = np.asarray(kt(base.grid), dtype=float)
    if kv.ndim == 1:
        kv = kv[:, None]
    beta = base.beta + offset * kv
    fn = base.beta_fn

    def beta_fn(t: float) -> np.ndarray:
        return (np.atleast_1d(fn(t))
                + offset * np.atleast_1d(model.kernel(model.T, float(t))))

    return EffortPolicy(grid=base.grid, beta=beta,
                        effort=beta @ model.Gamma_inv.T, beta_fn=beta_fn,
                        effort_fn=lambda t: model.Gamma_inv @ beta_fn(t))


def _is_radial(model: AgencyModel) -> bool:
    g = model.Gamma
    return bool(np.allclose(g, g[0, 0] * np.eye(model.dim), rtol=0.0,
                            atol=1e-12 * max(1.0, abs(g[0, 0]))))


def _check_slope(model: AgencyModel, offset: float) -> CheckResult:
    quote = contract_quote(model)
    if quote.degenerate:
        return _result("slope-formula", 0.0, 1e-14,
                       detail="degenerate kernel, constant pay")
    if model.dim == 1:
        k = model.kappa
        expected = (model.gamma_P + 1.0 / k) / (
            model.gamma_A + model.gamma_P + 1.0 / k)
        return _result("slope-formula", abs(quote.slope + offset - expected),
                       1e-14)
    # multi-d: the reported slope must sit at the top of the scan
    # objective; the statistic is the Newton step |F'/F''| at the slope
    b = quote.slope + offset
    h = 1e-4
    scan = brute_force_slope(model.y0, model, np.array([b - h, b, b + h]))
    lo, mid, hi = (ev.value for ev in scan.values)
    first = (hi - lo) / (2.0 * h)
    second = (hi - 2.0 * mid + lo) / h ** 2
    if second == 0.0:
        return _result("slope-formula", math.inf, 1e-6, detail="flat scan")
    return _result("slope-formula", abs(first / second), 1e-6)


def _check_stationarity(model: AgencyModel, offset: float) -> CheckResult:
    po = PiecewiseObjective(model.y0, model, _STATIONARITY_PIECES)
    if offset == 0.0:
        betas = po.optimal_projection()
    else:
        policy = _offset_policy(model, offset)
        edges = np.linspace(0.0, model.T, _STATIONARITY_PIECES + 1)
        betas = policy.beta_at(0.5 * (edges[:-1] + edges[1:]))
    grad = po.gradient(betas)
    return _result("stationarity", float(np.max(np.abs(grad))), 1e-6)


def _check_oracle_value(model: AgencyModel, offset: float) -> CheckResult:
    policy = _offset_policy(model, offset)
    j = principal_objective(model.y0, policy, model).value
    vsb = principal_value_sb(model)
    return _result("oracle-value", abs(j - vsb), 1e-10,
                   detail=f"J={j!r} V_SB={vsb!r}")


def _check_agent_identity(model: AgencyModel) -> CheckResult:
    policy = optimal_effort(model)
    ce = agent_certainty_equivalent(model.y0, policy, policy, model)
    return _result("agent-identity", abs(ce - model.y0), 1e-12)


def _check_voi_identity(model: AgencyModel) -> CheckResult:
    gap = chi0(model) - phi0(model)
    return _result("voi-identity", abs(voi_spectral(model) - gap), 1e-9,
                   detail=f"gap={gap!r}")


def _check_voi_radial(model: AgencyModel) -> CheckResult:
    return _result("voi-radial", abs(chi0(model) - phi0(model)), _GAP_TOL)


def _check_voi_bounds(model: AgencyModel) -> CheckResult:
    gap = chi0(model) - phi0(model)
    bound = voi_upper_bound(model)
    return _result("voi-bounds", max(-gap, gap - bound), _GAP_TOL,
                   detail=f"gap={gap!r} bound={bound!r}")


def _check_mc_value(model: AgencyModel, cfg: SimulationConfig,
                    offset: float) -> CheckResult:
    policy = _offset_policy(model, offset)
    sample = sample_terminal(model, policy, model.y0, cfg)
    vals = -np.exp(-model.gamma_P * (sample.x - sample.y))
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    vsb = principal_value_sb(model)
    z = abs(mean - vsb) / stderr if stderr > 0 else math.inf
    return _result("mc-value", z, 3.0, detail=f"mean={mean!r} V_SB={vsb!r}")


def _check_martingale(model: AgencyModel, cfg: SimulationConfig,
                      offset: float) -> CheckResult:
    policy = _offset_policy(model, offset)
    path_cfg = SimulationConfig(n_paths=cfg.n_paths, n_steps=cfg.n_steps,
                                seed=cfg.seed, scheme="euler-path")
    dt = model.T / cfg.n_steps
    cps = [round(f * cfg.n_steps / 4.0) * dt for f in range(5)]
    report = martingale_diagnostic(model, policy, model.y0, path_cfg,
                                   checkpoints=cps)
    live = report.stderrs > 0
    zmax = 0.0
    if np.any(live):
        zmax = float(np.max(np.abs(report.means[live] - report.initial)
                            / report.stderrs[live]))
    return _result("martingale-flatness", zmax, 3.0,
                   detail=f"initial={report.initial!r}")


def verify_scenario(scenario, slope_offset: float = 0.0) -> list[CheckResult]:
    """Runs every applicable check; slope_offset is a fault-injection hook.

    A non-zero offset corrupts the contract sensitivity fed to the
    stationarity, value and simulation checks (negative control).
    """
    model = scenario.model
    cfg = scenario.simulation
    checks = [
        ("slope-formula", lambda: _check_slope(model, slope_offset)),
        ("stationarity", lambda: _check_stationarity(model, slope_offset)),
        ("oracle-value", lambda: _check_oracle_value(model, slope_offset)),
        ("agent-identity", lambda: _check_agent_identity(model)),
        ("voi-identity", lambda: _check_voi_identity(model)),
        ("voi-bounds", lambda: _check_voi_bounds(model)),
        ("mc-value", lambda: _check_mc_value(model, cfg, slope_offset)),
        ("martingale-flatness",
         lambda: _check_martingale(model, cfg, slope_offset)),
    ]
    if _is_radial(model):
        checks.insert(6, ("voi-radial", lambda: _check_voi_radial(model)))
    results = []
    for name, run in checks:
        try:
            results.append(run())
        except Exception as exc:  # keep going; record the failure
            results.append(CheckResult(check=name, status="fail",
                                       statistic=math.inf,
                                       tolerance=math.nan,
                                       detail=f"{type(exc).__name__}: {exc}"))
    return results
