"""Optimal dynamic contracts for Gaussian Volterra principal-agent models.

Closed-form optimal efforts, linear contract coefficients and values of
information for CARA principal-agent problems whose output is a Gaussian
Volterra process, together with independent brute-force oracles and
Monte Carlo diagnostics that certify the closed forms.
"""

from .hypergeometric import gauss_2f1, SeriesConvergenceError
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
from .quadrature import (
    QuadratureRule,
    DEFAULT_RULE,
    l2_inner_product,
    kernel_energy,
    kernel_gram,
    kernel_covariance,
    rule_nodes,
    segment_nodes,
)
from .resolvent import (
    ConvolutionMeasure,
    Resolvent,
    IntegroModel,
    solve_resolvent,
    induced_kernel,
    induced_input_curve,
)
from .contracts import (
    AgencyModel,
    EffortPolicy,
    ContractQuote,
    SweepGrid,
    DegenerateModelError,
    SWEEP_COLUMNS,
    dual_cost,
    agent_best_response,
    optimal_effort,
    phi0,
    principal_value_sb,
    optimal_contract_1d,
    contract_quote,
    optimal_linear_slope,
    chi0,
    value_of_information,
    voi_spectral,
    voi_upper_bound,
    voi_sweep,
)
from .oracle import (
    ObjectiveEvaluation,
    SlopeScan,
    PiecewiseObjective,
    ConvergenceError,
    principal_objective,
    agent_certainty_equivalent,
    brute_force_slope,
    brute_force_effort,
)
from .simulate import (
    SimulationConfig,
    TerminalSample,
    PathBundle,
    MartingaleReport,
    OutputPaths,
    sample_terminal,
    simulate_paths,
    martingale_diagnostic,
    sample_output_path,
)
from .scenario import (
    Scenario,
    ScenarioError,
    parse_scenario,
    load_scenario,
    normalized_json,
)
from .verify import CheckResult, verify_scenario

__version__ = "0.1.0"

__all__ = [
    "gauss_2f1",
    "SeriesConvergenceError",
    "VolterraKernel",
    "FractionalParams",
    "make_constant",
    "make_exponential",
    "make_bridge",
    "make_riemann_liouville",
    "make_fbm_molchan_golosov",
    "make_discrete_observation",
    "mean_reverting_input_curve",
    "QuadratureRule",
    "DEFAULT_RULE",
    "l2_inner_product",
    "kernel_energy",
    "kernel_gram",
    "kernel_covariance",
    "rule_nodes",
    "segment_nodes",
    "ConvolutionMeasure",
    "Resolvent",
    "IntegroModel",
    "solve_resolvent",
    "induced_kernel",
    "induced_input_curve",
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
    "ObjectiveEvaluation",
    "SlopeScan",
    "PiecewiseObjective",
    "ConvergenceError",
    "principal_objective",
    "agent_certainty_equivalent",
    "brute_force_slope",
    "brute_force_effort",
    "SimulationConfig",
    "TerminalSample",
    "PathBundle",
    "MartingaleReport",
    "OutputPaths",
    "sample_terminal",
    "simulate_paths",
    "martingale_diagnostic",
    "sample_output_path",
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
    "normalized_json",
    "CheckResult",
    "verify_scenario",
    "__version__",
]
