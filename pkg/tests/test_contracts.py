"""Closed-form contract quantities against hand-computed references."""

import math

import numpy as np
import pytest

from volterra_agency import (
    AgencyModel,
    DegenerateModelError,
    EffortPolicy,
    SWEEP_COLUMNS,
    SweepGrid,
    agent_best_response,
    chi0,
    contract_quote,
    dual_cost,
    make_bridge,
    make_constant,
    make_discrete_observation,
    make_exponential,
    make_fbm_molchan_golosov,
    make_riemann_liouville,
    optimal_contract_1d,
    optimal_effort,
    optimal_linear_slope,
    phi0,
    principal_value_sb,
    value_of_information,
    voi_spectral,
    voi_sweep,
    voi_upper_bound,
)


def model_1d(gamma_A=1.0, gamma_P=1.0, kappa=1.0, kernel=None, T=1.0, **kw):
    kernel = kernel if kernel is not None else make_constant(1.0)
    return AgencyModel(gamma_A=gamma_A, gamma_P=gamma_P, cost=kappa,
                       kernel=kernel, T=T, **kw)


def model_diag12():
    # d=2 reference instance: unit constant kernel in both components,
    # effort cost diag(1, 2), unit risk aversions, horizon 1
    return AgencyModel(gamma_A=1.0, gamma_P=1.0, cost=np.diag([1.0, 2.0]),
                       kernel=make_constant([1.0, 1.0]), T=1.0)


def test_model_validation():
    with pytest.raises(ValueError):
        model_1d(gamma_A=0.0)
    with pytest.raises(ValueError):
        model_1d(gamma_P=-1.0)
    with pytest.raises(ValueError):
        model_1d(T=0.0)
    with pytest.raises(ValueError):
        model_1d(kappa=0.0)
    with pytest.raises(ValueError):
        # scalar cost only pairs with a scalar kernel
        AgencyModel(gamma_A=1.0, gamma_P=1.0, cost=1.0,
                    kernel=make_constant([1.0, 1.0]), T=1.0)
    with pytest.raises(ValueError):
        AgencyModel(gamma_A=1.0, gamma_P=1.0,
                    cost=np.array([[1.0, 0.5], [0.0, 2.0]]),
                    kernel=make_constant([1.0, 1.0]), T=1.0)
    with pytest.raises(ValueError):
        AgencyModel(gamma_A=1.0, gamma_P=1.0,
                    cost=np.array([[1.0, 2.0], [2.0, 1.0]]),
                    kernel=make_constant([1.0, 1.0]), T=1.0)
    with pytest.raises(ValueError):
        AgencyModel(gamma_A=1.0, gamma_P=1.0, cost=np.eye(3),
                    kernel=make_constant([1.0, 1.0]), T=1.0)
    with pytest.raises(ValueError):
        model_1d(kernel=make_bridge(0.5), T=1.0)
    with pytest.raises(ValueError):
        model_1d(kernel=make_discrete_observation([0.5, 2.0]), T=1.0)


def test_model_helpers():
    m = model_1d(kappa=2.0)
    assert m.dim == 1
    assert m.Gamma.shape == (1, 1)
    assert m.kappa == 2.0
    assert m.Gamma_inv[0, 0] == pytest.approx(0.5)
    assert m.g0_terminal() == 0.0
    assert m.kernel_energy() == pytest.approx(1.0, rel=1e-13)
    m2 = model_diag12()
    with pytest.raises(ValueError):
        m2.kappa
    assert m2.input_curve(0.3) == 0.0
    m3 = model_1d(g0=2.5)
    assert m3.g0_terminal() == 2.5
    m4 = model_1d(g0=lambda t: t * t)
    assert m4.g0_terminal() == 1.0


def test_phi0_hand_values():
    assert phi0(model_1d()) == pytest.approx(-1.0 / 6.0, abs=1e-14)
    assert phi0(model_1d(gamma_P=2.0)) == pytest.approx(-0.25, abs=1e-14)
    assert phi0(model_diag12()) == pytest.approx(-7.0 / 60.0, abs=1e-14)


def test_principal_value_is_negative_exponential_of_phi0():
    m = model_1d(gamma_P=2.0)
    assert principal_value_sb(m) == pytest.approx(-math.exp(-0.25), abs=1e-14)
    # y0 and g0 shift the exponent by -gamma_P (g0(T) - y0)
    m = model_1d(gamma_P=2.0, y0=0.3, g0=1.0)
    want = -math.exp(-2.0 * (1.0 - 0.3) - 0.25)
    assert principal_value_sb(m) == pytest.approx(want, rel=1e-13)


def test_slope_depends_only_on_preferences():
    assert optimal_contract_1d(model_1d()).slope == pytest.approx(
        2.0 / 3.0, abs=1e-14)
    assert optimal_contract_1d(model_1d(gamma_P=2.0)).slope == pytest.approx(
        0.75, abs=1e-14)
    assert optimal_contract_1d(model_1d(gamma_A=2.0)).slope == pytest.approx(
        0.5, abs=1e-14)
    kernels = [
        make_constant(1.0),
        make_constant(2.5),
        make_exponential(1.3),
        make_exponential(-0.7),
        make_bridge(2.0),
        make_riemann_liouville(0.3),
        make_riemann_liouville(0.75),
        make_fbm_molchan_golosov(0.4),
        make_discrete_observation([0.5, 1.0]),
    ]
    for k in kernels:
        q = optimal_contract_1d(model_1d(kernel=k))
        assert q.slope == pytest.approx(2.0 / 3.0, abs=1e-14), k.label


def test_intercept_hand_value():
    # gamma_A=2, kappa=1, unit kernel, g0(T)=1: the pay rule charges the
    # agent -1/2 of the input level and collects 1/8 for risk sharing
    m = model_1d(gamma_A=2.0, g0=1.0)
    q = optimal_contract_1d(m)
    assert q.slope == pytest.approx(0.5, abs=1e-14)
    assert q.integral_term == pytest.approx(0.125, abs=1e-14)
    assert q.intercept == pytest.approx(-0.375, abs=1e-14)
    assert q.beta_star.beta_at(0.37)[0] == pytest.approx(0.5, abs=1e-14)
    # kappa * gamma_A = 1 kills the integral term
    q0 = optimal_contract_1d(model_1d())
    assert q0.integral_term == 0.0
    assert q0.intercept == 0.0


def test_one_dimensional_linear_contract_is_exactly_optimal():
    for kw in ({}, {"gamma_P": 2.0}, {"gamma_A": 3.0, "kappa": 0.5}):
        q = optimal_contract_1d(model_1d(**kw))
        assert q.chi0 == pytest.approx(q.phi0, abs=1e-14)
        assert q.voi == pytest.approx(1.0, abs=1e-13)


def test_linear_slope_and_gap_hand_values():
    m = model_diag12()
    assert optimal_linear_slope(m) == pytest.approx(7.0 / 11.0, abs=1e-14)
    assert chi0(m) == pytest.approx(-2.5 / 22.0, abs=1e-14)
    gap = chi0(m) - phi0(m)
    assert gap == pytest.approx(1.0 / 330.0, abs=1e-13)
    assert value_of_information(m) == pytest.approx(
        math.exp(-1.0 / 330.0), abs=1e-13)
    q = contract_quote(m)
    assert q.slope == pytest.approx(7.0 / 11.0, abs=1e-14)
    assert q.V_SB == pytest.approx(-math.exp(-7.0 / 60.0), rel=1e-13)
    assert q.V_lin == pytest.approx(-math.exp(-2.5 / 22.0), rel=1e-13)
    assert q.V_SB >= q.V_lin


def test_spectral_gap_matches_direct_difference():
    m = model_diag12()
    assert voi_spectral(m) == pytest.approx(chi0(m) - phi0(m), abs=1e-12)
    # a rotated cost matrix exercises the eigenbasis path
    c, s = math.cos(0.6), math.sin(0.6)
    rot = np.array([[c, -s], [s, c]])
    gamma = rot @ np.diag([1.0, 2.0]) @ rot.T
    m2 = AgencyModel(gamma_A=1.0, gamma_P=1.0, cost=gamma,
                     kernel=make_exponential([0.4, -0.3]), T=1.0)
    assert voi_spectral(m2) == pytest.approx(chi0(m2) - phi0(m2), abs=1e-12)


def test_radial_cost_makes_linear_contracts_free():
    m = AgencyModel(gamma_A=1.0, gamma_P=1.0, cost=np.diag([1.5, 1.5]),
                    kernel=make_exponential([0.5, -0.5]), T=1.0)
    assert abs(chi0(m) - phi0(m)) <= 1e-14
    assert abs(voi_spectral(m)) <= 1e-14
    assert value_of_information(m) == pytest.approx(1.0, abs=1e-13)


def test_gap_lies_between_zero_and_spread_bound():
    m = model_diag12()
    assert voi_upper_bound(m) == pytest.approx(0.85, abs=1e-13)
    rng = np.random.default_rng(7)
    for _ in range(25):
        d = int(rng.integers(2, 4))
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        lam = rng.uniform(0.3, 3.0, size=d)
        gamma = q @ np.diag(lam) @ q.T
        gamma = 0.5 * (gamma + gamma.T)
        kernel = make_exponential(rng.uniform(-1.0, 1.5, size=d))
        m = AgencyModel(gamma_A=float(rng.uniform(0.5, 2.0)),
                        gamma_P=float(rng.uniform(0.5, 2.0)),
                        cost=gamma, kernel=kernel,
                        T=float(rng.uniform(0.5, 2.0)))
        gap = chi0(m) - phi0(m)
        bound = voi_upper_bound(m)
        assert gap >= -1e-12
        assert gap <= bound + 1e-12


def test_dual_cost_values():
    assert dual_cost(1.0, model_1d(gamma_A=2.0)) == pytest.approx(0.5)
    assert dual_cost(1.0, model_1d()) == pytest.approx(0.0, abs=1e-15)
    m = model_diag12()
    # M = diag(gamma_A - 1, gamma_A - 1/2)
    got = dual_cost([1.0, 2.0], m)
    assert got == pytest.approx(0.5 * (0.0 + 0.5 * 4.0), abs=1e-14)


def test_agent_best_response_divides_by_cost():
    m = model_diag12()
    grid = np.linspace(0.0, 1.0, 5)
    beta = np.tile([2.0, 3.0], (5, 1))
    pol = EffortPolicy(grid=grid, beta=beta, effort=np.zeros_like(beta))
    out = agent_best_response(pol, m)
    assert np.allclose(out.effort, np.tile([2.0, 1.5], (5, 1)))
    with pytest.raises(ValueError):
        agent_best_response(
            EffortPolicy(grid=grid, beta=beta[:, :1], effort=beta[:, :1]), m)


def test_optimal_effort_paths():
    q = optimal_effort(model_1d())
    assert np.allclose(q.beta, 2.0 / 3.0)
    assert np.allclose(q.effort, 2.0 / 3.0)
    lam = 0.8
    m = model_1d(kernel=make_exponential(lam))
    pol = optimal_effort(m)
    t = 0.4
    want = (2.0 / 3.0) * math.exp(-lam * (1.0 - t))
    assert pol.beta_at(t)[0] == pytest.approx(want, rel=1e-14)
    vals = pol.beta_at(np.array([0.2, 0.9]))
    assert vals.shape == (2, 1)


def test_effort_policy_validation():
    grid = np.linspace(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        EffortPolicy(grid=grid, beta=np.zeros((3, 1)), effort=np.zeros((3, 1)))
    with pytest.raises(ValueError):
        EffortPolicy(grid=grid, beta=np.full((4, 1), np.nan),
                     effort=np.zeros((4, 1)))


def test_degenerate_kernel_quotes_reservation_contract():
    # no observation at the horizon: the terminal slice carries no mass
    kernel = make_discrete_observation([0.25, 0.5])
    m = model_1d(kernel=kernel)
    with pytest.raises(DegenerateModelError):
        optimal_linear_slope(m)
    assert value_of_information(m) == 1.0
    q = optimal_contract_1d(m)
    assert q.degenerate
    assert q.integral_term == 0.0
    assert q.intercept == pytest.approx(0.0)
    assert q.V_SB == pytest.approx(-1.0)


def test_degenerate_multi_d_quote():
    dead = make_discrete_observation([0.25, 0.5])

    def _eval(t, s):
        base = dead.eval(t, s)
        return np.hstack([base, base])

    two = type(dead)(dim=2, eval=_eval, singularity_exponent=0.0,
                     label="discrete", params=dict(dead.params))
    m = AgencyModel(gamma_A=1.0, gamma_P=1.0, cost=np.eye(2), kernel=two,
                    T=1.0)
    q = contract_quote(m)
    assert q.degenerate
    assert q.slope == 0.0
    assert q.voi == 1.0
    assert q.V_SB == q.V_lin


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        SweepGrid(family="nope", T_values=[1.0], p1_values=[1.0],
                  p2_values=[1.0])
    with pytest.raises(ValueError):
        SweepGrid(family="exponential", T_values=[], p1_values=[1.0],
                  p2_values=[1.0])
    with pytest.raises(ValueError):
        SweepGrid(family="exponential", T_values=[1.0], p1_values=[1.0],
                  p2_values=[1.0], cost_diag=(1.0,))


def test_sweep_rows_order_and_invariants():
    grid = SweepGrid(family="exponential", T_values=[0.5, 1.0],
                     p1_values=[-0.5, 0.5], p2_values=[0.0, 1.0])
    rows = voi_sweep(grid)
    assert len(rows) == 8
    assert list(rows[0]) == list(SWEEP_COLUMNS)
    # deterministic iteration order: T outermost, then p1, then p2
    keys = [(r["T"], r["p1"], r["p2"]) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        assert 0.0 <= r["voi"] <= 1.0
        assert r["gap"] == pytest.approx(r["chi0"] - r["phi0"], abs=1e-15)
        assert r["gap"] >= -1e-13
        assert r["l2_1"] > 0.0 and r["l2_2"] > 0.0


def test_sweep_radial_cost_has_unit_voi():
    grid = SweepGrid(family="fractional", T_values=[1.0],
                     p1_values=[0.25, 0.5], p2_values=[0.5, 0.75],
                     cost_diag=(1.0, 1.0))
    for r in voi_sweep(grid):
        assert r["voi"] >= 1.0 - 1e-12
