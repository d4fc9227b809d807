"""Batch command line interface.

Commands consume a JSON scenario file and write JSON or CSV artifacts.
Every artifact embeds the normalized scenario, so a run can be
reproduced bit for bit from its own output. Exit codes: 0 success,
1 validation error, 2 numerical failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .contracts import contract_quote, optimal_effort, voi_sweep, SWEEP_COLUMNS
from .oracle import ConvergenceError
from .resolvent import induced_input_curve
from .scenario import Scenario, ScenarioError, load_scenario, normalized_json
from .simulate import (
    SimulationConfig,
    martingale_diagnostic,
    sample_output_path,
    sample_terminal,
)
from .verify import verify_scenario

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3


def _write_text(out: str | None, text: str):
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _json_artifact(scenario: Scenario, payload: dict) -> str:
    body = {"scenario": scenario.normalized}
    body.update(payload)
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def _csv_artifact(scenario: Scenario, header: list, rows: list,
                  comments: list | None = None) -> str:
    buf = io.StringIO()
    buf.write("# scenario: "
              + normalized_json(scenario, compact=True) + "\n")
    for line in comments or []:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _figure_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".png"


def _quote_fields(quote) -> dict:
    return {
        "slope": quote.slope,
        "intercept": quote.intercept,
        "integral_term": quote.integral_term,
        "phi0": quote.phi0,
        "chi0": quote.chi0,
        "V_SB": quote.V_SB,
        "V_lin": quote.V_lin,
        "voi": quote.voi,
        "agent_value": quote.agent_value,
        "degenerate": quote.degenerate,
    }


def cmd_price(scenario: Scenario, args) -> int:
    quote = contract_quote(scenario.model)
    if quote.degenerate:
        print("warning: kernel carries no terminal information; "
              "the optimal pay is the constant y0", file=sys.stderr)
    policy = quote.beta_star
    grid = [float(t) for t in policy.grid]
    beta = [[float(v) for v in row] for row in policy.beta]
    if args.format == "json":
        text = _json_artifact(scenario, {
            "quote": _quote_fields(quote),
            "beta_star": {"t": grid, "beta": beta},
        })
    else:
        fields = _quote_fields(quote)
        comments = [f"{k}={fields[k]!r}" for k in fields]
        dim = scenario.model.dim
        header = ["t"] + [f"beta_{i + 1}" for i in range(dim)]
        rows = [[t] + row for t, row in zip(grid, beta)]
        text = _csv_artifact(scenario, header, rows, comments)
    _write_text(args.out, text)
    if args.plot:
        from .plots import plot_beta
        plot_beta(policy.grid, policy.beta, _figure_path(args.out))
    return EXIT_OK


def cmd_voi_sweep(scenario: Scenario, args) -> int:
    if scenario.sweep is None:
        raise ScenarioError("sweep", "missing required section for voi-sweep")
    rows = voi_sweep(scenario.sweep)
    if args.format == "json":
        text = _json_artifact(scenario, {
            "columns": list(SWEEP_COLUMNS),
            "rows": rows,
        })
    else:
        table = [[row[c] for c in SWEEP_COLUMNS] for row in rows]
        text = _csv_artifact(scenario, list(SWEEP_COLUMNS), table)
    _write_text(args.out, text)
    if args.plot:
        from .plots import plot_sweep
        plot_sweep(rows, _figure_path(args.out))
    return EXIT_OK


def cmd_resolvent(scenario: Scenario, args) -> int:
    res = scenario.resolvent
    if res is None:
        raise ScenarioError("kernel.type",
                            "resolvent command requires a resolvent kernel")
    integro = scenario.integro
    w = scenario.aggregation
    curve = induced_input_curve(integro, res)
    d = res.dim
    d_noise = integro.sigma.shape[1]
    header = (["t"]
              + [f"R_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
              + [f"K_{j + 1}" for j in range(d_noise)]
              + [f"g0_{i + 1}" for i in range(d)])
    rows = []
    for k, t in enumerate(res.grid):
        rmat = res.values[k]
        krow = w @ rmat @ integro.sigma
        gval = np.atleast_1d(curve(float(t)))
        rows.append([float(t)]
                    + [float(v) for v in rmat.ravel()]
                    + [float(v) for v in krow]
                    + [float(v) for v in gval])
    if args.format == "json":
        text = _json_artifact(scenario, {
            "columns": header,
            "rows": [dict(zip(header, row)) for row in rows],
        })
    else:
        text = _csv_artifact(scenario, header, rows)
    _write_text(args.out, text)
    if args.plot:
        from .plots import plot_resolvent
        plot_resolvent(res, _figure_path(args.out), curve=curve)
    return EXIT_OK


def _simulate_terminal(scenario: Scenario, args) -> int:
    model = scenario.model
    cfg = scenario.simulation
    policy = optimal_effort(model)
    sample = sample_terminal(model, policy, model.y0, cfg)
    vals = -np.exp(-model.gamma_P * (sample.x - sample.y))
    estimate = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    from .contracts import principal_value_sb
    vsb = principal_value_sb(model)
    z = (estimate - vsb) / stderr if stderr > 0 else float("nan")
    record = {
        "n_paths": cfg.n_paths,
        "mean_x": sample.mean_x,
        "mean_y": sample.mean_y,
        "sample_mean_x": float(np.mean(sample.x)),
        "sample_mean_y": float(np.mean(sample.y)),
        "estimate": estimate,
        "stderr": stderr,
        "V_SB": vsb,
        "z": z,
    }
    if args.format == "json":
        text = _json_artifact(scenario, {"terminal": record})
    else:
        header = list(record)
        text = _csv_artifact(scenario, header, [[record[k] for k in header]])
    _write_text(args.out, text)
    if args.plot:
        from .plots import plot_paths
        paths_cfg = SimulationConfig(n_paths=min(cfg.n_paths, 200),
                                     n_steps=cfg.n_steps, seed=cfg.seed)
        bundle = sample_output_path(model, paths_cfg)
        plot_paths(bundle.times, bundle.paths, _figure_path(args.out))
    return EXIT_OK


def _simulate_paths(scenario: Scenario, args) -> int:
    model = scenario.model
    cfg = scenario.simulation
    policy = optimal_effort(model)
    dt = model.T / cfg.n_steps
    cps = [round(f * cfg.n_steps / 4.0) * dt for f in range(5)]
    report = martingale_diagnostic(model, policy, model.y0, cfg,
                                   checkpoints=cps)
    rows = []
    for t, mean, se, ok in zip(report.times, report.means, report.stderrs,
                               report.within_bands):
        z = (mean - report.initial) / se if se > 0 else 0.0
        rows.append([float(t), float(mean), float(se), float(z), bool(ok)])
    comments = [
        f"initial={report.initial!r}",
        f"drift_estimate={report.drift_estimate!r}",
        f"drift_stderr={report.drift_stderr!r}",
    ]
    header = ["t", "mean", "stderr", "z", "within_band"]
    if args.format == "json":
        text = _json_artifact(scenario, {
            "initial": report.initial,
            "drift_estimate": report.drift_estimate,
            "drift_stderr": report.drift_stderr,
            "checkpoints": [dict(zip(header, row)) for row in rows],
        })
    else:
        text = _csv_artifact(scenario, header, rows, comments)
    _write_text(args.out, text)
    if args.plot:
        from .plots import plot_martingale
        plot_martingale(report, _figure_path(args.out))
    return EXIT_OK


def cmd_simulate(scenario: Scenario, args) -> int:
    if scenario.simulation.scheme == "terminal-exact":
        return _simulate_terminal(scenario, args)
    return _simulate_paths(scenario, args)


def cmd_verify(scenario: Scenario, args) -> int:
    results = verify_scenario(scenario, slope_offset=args.slope_offset)
    passed = all(r.passed for r in results)
    if args.format == "json":
        text = _json_artifact(scenario, {
            "checks": [r.as_dict() for r in results],
            "passed": passed,
        })
    else:
        header = ["check", "status", "statistic", "tolerance", "detail"]
        rows = [[r.check, r.status, r.statistic, r.tolerance, r.detail]
                for r in results]
        text = _csv_artifact(scenario, header, rows)
    _write_text(args.out, text)
    if args.plot:
        from .plots import plot_martingale
        cfg = scenario.simulation
        path_cfg = SimulationConfig(n_paths=cfg.n_paths, n_steps=cfg.n_steps,
                                    seed=cfg.seed, scheme="euler-path")
        model = scenario.model
        dt = model.T / cfg.n_steps
        cps = [round(f * cfg.n_steps / 4.0) * dt for f in range(5)]
        report = martingale_diagnostic(model, optimal_effort(model),
                                       model.y0, path_cfg, checkpoints=cps)
        plot_martingale(report, _figure_path(args.out))
    return EXIT_OK if passed else EXIT_VERIFICATION


_COMMANDS = {
    "price": cmd_price,
    "voi-sweep": cmd_voi_sweep,
    "resolvent": cmd_resolvent,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}

_DEFAULT_FORMATS = {
    "price": "json",
    "voi-sweep": "csv",
    "resolvent": "csv",
    "simulate": "csv",
    "verify": "json",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volterra-agency",
        description="Optimal dynamic contracts for Gaussian Volterra "
                    "principal-agent models.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--scenario", required=True,
                         help="path to the JSON scenario file")
        cmd.add_argument("--out", default=None,
                         help="output file (default: stdout)")
        cmd.add_argument("--format", choices=("json", "csv"),
                         default=_DEFAULT_FORMATS[name])
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the scenario simulation seed")
        cmd.add_argument("--plot", action="store_true",
                         help="also render a figure next to --out")
        if name == "verify":
            cmd.add_argument("--slope-offset", type=float, default=0.0,
                             help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else EXIT_VALIDATION
    if args.plot and args.out is None:
        print("error: --plot requires --out", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ScenarioError("simulation.seed",
                                    "must be non-negative")
            scenario = scenario.with_seed(args.seed)
        return _COMMANDS[args.command](scenario, args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, ArithmeticError, RuntimeError, ValueError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
