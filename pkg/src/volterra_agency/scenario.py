"""Scenario files: parsing, validation, and normalized echoing.

A scenario is a single JSON object with sections model / kernel /
quadrature / simulation / sweep. Parsing fills every default explicitly
and records the result as a normalized dictionary, so re-running any
command on an echoed scenario reproduces the original run bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .contracts import AgencyModel, SweepGrid
from .kernels import (
    VolterraKernel,
    FractionalParams,
    make_constant,
    make_exponential,
    make_bridge,
    make_riemann_liouville,
    make_fbm_molchan_golosov,
    make_discrete_observation,
    mean_reverting_input_curve,
)
from .quadrature import QuadratureRule
from .resolvent import (
    ConvolutionMeasure,
    IntegroModel,
    Resolvent,
    solve_resolvent,
    induced_kernel,
    induced_input_curve,
)
from .simulate import SimulationConfig

__all__ = [
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
    "normalized_json",
]

_KERNEL_TYPES = ("constant", "exponential", "bridge", "riemann_liouville",
                 "fbm", "discrete", "resolvent")
_G0_TYPES = ("zero", "constant", "mean_reverting", "induced")
# resolvent grid resolution when the scenario does not pin one
_DEFAULT_RESOLVENT_STEPS = 4000


class ScenarioError(ValueError):
    """Schema violation; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Scenario:
    """A validated scenario with its ready-to-run objects.

    normalized is the fully defaulted dictionary echoed into every
    output artifact; integro/resolvent are populated only for
    resolvent-induced kernels.
    """

    model: AgencyModel
    simulation: SimulationConfig
    sweep: SweepGrid | None
    normalized: dict
    integro: IntegroModel | None = None
    resolvent: Resolvent | None = None
    aggregation: np.ndarray | None = None

    def with_seed(self, seed: int) -> "Scenario":
        """The same scenario with the simulation seed replaced."""
        cfg = self.simulation
        new_cfg = SimulationConfig(n_paths=cfg.n_paths, n_steps=cfg.n_steps,
                                   seed=int(seed), scheme=cfg.scheme)
        norm = json.loads(json.dumps(self.normalized))
        norm["simulation"]["seed"] = int(seed)
        return Scenario(model=self.model, simulation=new_cfg,
                        sweep=self.sweep, normalized=norm,
                        integro=self.integro, resolvent=self.resolvent,
                        aggregation=self.aggregation)


def _require(section: dict, path: str, key: str):
    if key not in section:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return section[key]


def _number(value, path: str, positive: bool = False,
            nonnegative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ScenarioError(path, "must be finite")
    if positive and x <= 0.0:
        raise ScenarioError(path, f"must be positive, got {x!r}")
    if nonnegative and x < 0.0:
        raise ScenarioError(path, f"must be non-negative, got {x!r}")
    return x


def _integer(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {value}")
    return value


def _vector(value, path: str) -> list:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, "expected a number or a non-empty array")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _matrix(value, path: str) -> list:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [[float(value)]]
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, "expected a number or an array of rows")
    rows = []
    for i, row in enumerate(value):
        rows.append(_vector(row, f"{path}[{i}]"))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ScenarioError(path, "rows must have equal length")
    return rows


def _section(obj: dict, key: str, required: bool = False) -> dict:
    value = obj.get(key)
    if value is None:
        if required:
            raise ScenarioError(key, "missing required section")
        return {}
    if not isinstance(value, dict):
        raise ScenarioError(key, "section must be a JSON object")
    return value


def _reject_unknown(section: dict, path: str, allowed: tuple):
    for key in section:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}", "unknown field")


def _parse_measure(section: dict, path: str) -> tuple[ConvolutionMeasure, dict]:
    _reject_unknown(section, path, ("atoms", "density"))
    atoms_spec = section.get("atoms", [])
    if not isinstance(atoms_spec, list):
        raise ScenarioError(f"{path}.atoms", "expected an array")
    atoms = []
    norm_atoms = []
    for i, entry in enumerate(atoms_spec):
        if not isinstance(entry, dict):
            raise ScenarioError(f"{path}.atoms[{i}]", "expected an object")
        _reject_unknown(entry, f"{path}.atoms[{i}]", ("t", "a"))
        t = _number(_require(entry, f"{path}.atoms[{i}]", "t"),
                    f"{path}.atoms[{i}].t", nonnegative=True)
        a = _matrix(_require(entry, f"{path}.atoms[{i}]", "a"),
                    f"{path}.atoms[{i}].a")
        atoms.append((t, np.asarray(a)))
        norm_atoms.append({"t": t, "a": a})
    density = None
    norm = {"atoms": norm_atoms}
    dens_spec = section.get("density")
    if dens_spec is not None:
        if not isinstance(dens_spec, dict):
            raise ScenarioError(f"{path}.density", "expected an object")
        _reject_unknown(dens_spec, f"{path}.density",
                        ("breakpoints", "values"))
        breaks = _vector(_require(dens_spec, f"{path}.density", "breakpoints"),
                         f"{path}.density.breakpoints")
        values = _require(dens_spec, f"{path}.density", "values")
        if not isinstance(values, list) or not values:
            raise ScenarioError(f"{path}.density.values",
                                "expected a non-empty array of matrices")
        mats = [_matrix(v, f"{path}.density.values[{i}]")
                for i, v in enumerate(values)]
        if breaks[0] != 0.0:
            raise ScenarioError(f"{path}.density.breakpoints",
                                "must start at 0.0")
        if any(breaks[i] >= breaks[i + 1] for i in range(len(breaks) - 1)):
            raise ScenarioError(f"{path}.density.breakpoints",
                                "must be strictly increasing")
        if len(mats) != len(breaks):
            raise ScenarioError(
                f"{path}.density.values",
                f"need one matrix per breakpoint interval "
                f"({len(breaks)}), got {len(mats)}")
        edges = np.asarray(breaks)
        blocks = np.stack([np.asarray(m, dtype=float) for m in mats])

        def density(s: float) -> np.ndarray:
            j = int(np.searchsorted(edges, s, side="right")) - 1
            return blocks[max(j, 0)]

        norm["density"] = {"breakpoints": breaks, "values": mats}
    measure = ConvolutionMeasure(atoms=tuple(atoms), density=density)
    return measure, norm


def _build_resolvent_kernel(section: dict, path: str, T: float):
    _reject_unknown(section, path, ("type", "measure", "sigma", "X0", "h",
                                    "w", "n_steps"))
    measure_sec = _require(section, path, "measure")
    if not isinstance(measure_sec, dict):
        raise ScenarioError(f"{path}.measure", "expected an object")
    measure, norm_measure = _parse_measure(measure_sec, f"{path}.measure")
    d = measure.dim
    sigma = _matrix(section.get("sigma", 1.0), f"{path}.sigma")
    x0 = _vector(section.get("X0", [0.0] * d), f"{path}.X0")
    if len(x0) != d:
        raise ScenarioError(f"{path}.X0", f"must have {d} entries")
    h_spec = section.get("h")
    h = None
    norm_h = None
    if h_spec is not None:
        norm_h = _vector(h_spec, f"{path}.h")
        if len(norm_h) != d:
            raise ScenarioError(f"{path}.h", f"must have {d} entries")
        h_const = np.asarray(norm_h)
        h = lambda t: h_const
    w_default = [1.0] + [0.0] * (d - 1)
    w = _vector(section.get("w", w_default), f"{path}.w")
    if len(w) != d:
        raise ScenarioError(f"{path}.w", f"must have {d} entries")
    n_steps = _integer(section.get("n_steps", _DEFAULT_RESOLVENT_STEPS),
                       f"{path}.n_steps", minimum=2)
    integro = IntegroModel(X0=np.asarray(x0), h=h,
                           sigma=np.asarray(sigma), mu=measure)
    res = solve_resolvent(measure, T, n_steps)
    kernel = induced_kernel(integro, res, w=np.asarray(w))
    norm = {"type": "resolvent", "measure": norm_measure, "sigma": sigma,
            "X0": x0, "w": w, "n_steps": n_steps}
    if norm_h is not None:
        norm["h"] = norm_h
    return kernel, norm, integro, res, np.asarray(w)


def _build_kernel(section: dict, T: float):
    """Returns (kernel, normalized section, integro, resolvent, aggregation)."""
    ktype = _require(section, "kernel", "type")
    if ktype not in _KERNEL_TYPES:
        raise ScenarioError("kernel.type",
                            f"must be one of {_KERNEL_TYPES}, got {ktype!r}")
    if ktype == "resolvent":
        return _build_resolvent_kernel(section, "kernel", T)
    if ktype == "constant":
        _reject_unknown(section, "kernel", ("type", "sigma"))
        sigma = _vector(section.get("sigma", 1.0), "kernel.sigma")
        return (make_constant(sigma), {"type": ktype, "sigma": sigma},
                None, None, None)
    if ktype == "exponential":
        _reject_unknown(section, "kernel", ("type", "lambda"))
        lam = _vector(_require(section, "kernel", "lambda"), "kernel.lambda")
        return (make_exponential(lam), {"type": ktype, "lambda": lam},
                None, None, None)
    if ktype == "bridge":
        _reject_unknown(section, "kernel", ("type", "T0"))
        t0 = _vector(_require(section, "kernel", "T0"), "kernel.T0")
        return (make_bridge(t0, horizon=T), {"type": ktype, "T0": t0},
                None, None, None)
    if ktype in ("riemann_liouville", "fbm"):
        allowed = ("type", "H", "c_H") if ktype == "riemann_liouville" \
            else ("type", "H")
        _reject_unknown(section, "kernel", allowed)
        hs = _vector(_require(section, "kernel", "H"), "kernel.H")
        for i, h in enumerate(hs):
            if not 0.0 < h < 1.0:
                raise ScenarioError(f"kernel.H[{i}]",
                                    f"must lie strictly in (0, 1), got {h!r}")
        if ktype == "fbm":
            kernel = make_fbm_molchan_golosov([FractionalParams(h) for h in hs])
            return kernel, {"type": ktype, "H": hs}, None, None, None
        cs = section.get("c_H")
        if cs is None:
            params = [FractionalParams(h) for h in hs]
        else:
            cs = _vector(cs, "kernel.c_H")
            if len(cs) != len(hs):
                raise ScenarioError("kernel.c_H",
                                    "must have one entry per component")
            params = [FractionalParams(h, c) for h, c in zip(hs, cs)]
        kernel = make_riemann_liouville(params)
        return (kernel, {"type": ktype, "H": hs,
                         "c_H": [p.scale for p in params]}, None, None, None)
    # discrete observation times
    _reject_unknown(section, "kernel", ("type", "times"))
    times = _vector(_require(section, "kernel", "times"), "kernel.times")
    return (make_discrete_observation(times, horizon=T),
            {"type": ktype, "times": times}, None, None, None)


def _build_g0(section: dict, integro, res,
              w) -> tuple[Callable[[float], float] | None, dict]:
    gtype = section.get("type", "zero")
    if gtype not in _G0_TYPES:
        raise ScenarioError("model.g0.type",
                            f"must be one of {_G0_TYPES}, got {gtype!r}")
    if gtype == "zero":
        _reject_unknown(section, "model.g0", ("type",))
        return None, {"type": "zero"}
    if gtype == "constant":
        _reject_unknown(section, "model.g0", ("type", "value"))
        value = _number(_require(section, "model.g0", "value"),
                        "model.g0.value")
        return (lambda t: value), {"type": "constant", "value": value}
    if gtype == "mean_reverting":
        _reject_unknown(section, "model.g0", ("type", "x0", "mu0", "lambda"))
        x0 = _number(section.get("x0", 0.0), "model.g0.x0")
        mu0 = _number(section.get("mu0", 0.0), "model.g0.mu0")
        lam = _number(_require(section, "model.g0", "lambda"),
                      "model.g0.lambda")
        curve = mean_reverting_input_curve(x0, mu0, lam)
        return curve, {"type": "mean_reverting", "x0": x0, "mu0": mu0,
                       "lambda": lam}
    # induced: aggregate the resolvent model's vector input curve
    _reject_unknown(section, "model.g0", ("type",))
    if integro is None or res is None:
        raise ScenarioError("model.g0.type",
                            "induced requires a resolvent kernel")
    vec_curve = induced_input_curve(integro, res)
    wv = w

    def curve(t: float) -> float:
        return float(wv @ vec_curve(t))

    return curve, {"type": "induced"}


def parse_scenario(obj: dict) -> Scenario:
    """Validates an in-memory scenario object and builds its components."""
    if not isinstance(obj, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    _reject_unknown(obj, "$", ("model", "kernel", "quadrature",
                               "simulation", "sweep"))
    model_sec = _section(obj, "model", required=True)
    kernel_sec = _section(obj, "kernel", required=True)
    quad_sec = _section(obj, "quadrature")
    sim_sec = _section(obj, "simulation")
    sweep_sec = _section(obj, "sweep")

    _reject_unknown(model_sec, "model",
                    ("gamma_A", "gamma_P", "cost", "T", "y0", "g0"))
    gamma_a = _number(_require(model_sec, "model", "gamma_A"),
                      "model.gamma_A", positive=True)
    gamma_p = _number(_require(model_sec, "model", "gamma_P"),
                      "model.gamma_P", positive=True)
    T = _number(_require(model_sec, "model", "T"), "model.T", positive=True)
    y0 = _number(model_sec.get("y0", 0.0), "model.y0")

    _reject_unknown(quad_sec, "quadrature", ("panels", "order"))
    panels = _integer(quad_sec.get("panels", 64), "quadrature.panels",
                      minimum=1)
    order = _integer(quad_sec.get("order", 10), "quadrature.order", minimum=1)
    rule = QuadratureRule(n_panels=panels, nodes_per_panel=order)

    try:
        kernel, norm_kernel, integro, res, w = _build_kernel(kernel_sec, T)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("kernel", str(exc)) from exc

    cost_raw = _require(model_sec, "model", "cost")
    if isinstance(cost_raw, (int, float)) and not isinstance(cost_raw, bool):
        cost = _number(cost_raw, "model.cost", positive=True)
        norm_cost = cost
        if kernel.dim != 1:
            raise ScenarioError(
                "model.cost",
                f"scalar cost requires a 1-d kernel, got dim {kernel.dim}")
    else:
        norm_cost = _matrix(cost_raw, "model.cost")
        cost = np.asarray(norm_cost)
        if cost.shape != (kernel.dim, kernel.dim):
            raise ScenarioError(
                "model.cost",
                f"must be {kernel.dim}x{kernel.dim} for this kernel, "
                f"got {cost.shape[0]}x{cost.shape[1]}")

    g0_curve, norm_g0 = _build_g0(_section(model_sec, "g0"), integro, res, w)

    _reject_unknown(sim_sec, "simulation",
                    ("n_paths", "n_steps", "seed", "scheme"))
    n_paths = _integer(sim_sec.get("n_paths", 10000), "simulation.n_paths",
                       minimum=1)
    n_steps = _integer(sim_sec.get("n_steps", 256), "simulation.n_steps",
                       minimum=1)
    seed = _integer(sim_sec.get("seed", 0), "simulation.seed", minimum=0)
    scheme = sim_sec.get("scheme", "terminal-exact")
    try:
        sim = SimulationConfig(n_paths=n_paths, n_steps=n_steps, seed=seed,
                               scheme=scheme)
    except ValueError as exc:
        raise ScenarioError("simulation", str(exc)) from exc

    sweep = None
    norm_sweep = None
    if sweep_sec:
        _reject_unknown(sweep_sec, "sweep",
                        ("family", "T", "p1", "p2", "cost_diag"))
        family = _require(sweep_sec, "sweep", "family")
        t_vals = _vector(_require(sweep_sec, "sweep", "T"), "sweep.T")
        for i, t in enumerate(t_vals):
            _number(t, f"sweep.T[{i}]", positive=True)
        p1 = _vector(_require(sweep_sec, "sweep", "p1"), "sweep.p1")
        p2 = _vector(_require(sweep_sec, "sweep", "p2"), "sweep.p2")
        diag = _vector(sweep_sec.get("cost_diag", [1.0, 2.0]),
                       "sweep.cost_diag")
        if len(diag) != 2:
            raise ScenarioError("sweep.cost_diag",
                                "must have exactly two entries")
        try:
            sweep = SweepGrid(family=family, T_values=tuple(t_vals),
                              p1_values=tuple(p1), p2_values=tuple(p2),
                              gamma_A=gamma_a, gamma_P=gamma_p,
                              cost_diag=tuple(diag), y0=y0, rule=rule)
        except ValueError as exc:
            raise ScenarioError("sweep", str(exc)) from exc
        norm_sweep = {"family": family, "T": t_vals, "p1": p1, "p2": p2,
                      "cost_diag": diag}

    try:
        model = AgencyModel(gamma_A=gamma_a, gamma_P=gamma_p, cost=cost,
                            kernel=kernel, T=T, y0=y0, g0=g0_curve, rule=rule)
    except ValueError as exc:
        raise ScenarioError("model", str(exc)) from exc

    normalized = {
        "model": {"gamma_A": gamma_a, "gamma_P": gamma_p, "cost": norm_cost,
                  "T": T, "y0": y0, "g0": norm_g0},
        "kernel": norm_kernel,
        "quadrature": {"panels": panels, "order": order},
        "simulation": {"n_paths": n_paths, "n_steps": n_steps, "seed": seed,
                       "scheme": scheme},
    }
    if norm_sweep is not None:
        normalized["sweep"] = norm_sweep
    return Scenario(model=model, simulation=sim, sweep=sweep,
                    normalized=normalized, integro=integro, resolvent=res,
                    aggregation=w)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("$", f"invalid JSON: {exc}") from exc
    return parse_scenario(obj)


def normalized_json(scenario: Scenario, compact: bool = False) -> str:
    """Canonical text form of the normalized scenario (sorted keys)."""
    if compact:
        return json.dumps(scenario.normalized, sort_keys=True,
                          separators=(",", ":"))
    return json.dumps(scenario.normalized, sort_keys=True, indent=2)
