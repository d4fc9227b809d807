"""Quadrature rules, singular substitutions and kernel integrals."""

import math

import numpy as np
import pytest

from volterra_agency import (
    DEFAULT_RULE,
    QuadratureRule,
    kernel_covariance,
    kernel_energy,
    kernel_gram,
    l2_inner_product,
    make_bridge,
    make_constant,
    make_exponential,
    make_fbm_molchan_golosov,
    make_riemann_liouville,
    rule_nodes,
    segment_nodes,
)


def test_rule_validation():
    with pytest.raises(ValueError):
        QuadratureRule(0, 10)
    with pytest.raises(ValueError):
        QuadratureRule(10, 0)
    assert DEFAULT_RULE.n_panels == 64
    assert DEFAULT_RULE.nodes_per_panel == 10
    refined = DEFAULT_RULE.refined()
    assert refined.n_panels == 128


def test_rule_nodes_integrate_polynomials_exactly():
    x, w = rule_nodes(2.0, QuadratureRule(4, 6))
    # order-6 panels integrate degree-11 polynomials exactly
    for p in range(12):
        got = float(np.sum(w * x ** p))
        assert got == pytest.approx(2.0 ** (p + 1) / (p + 1), rel=1e-13)
    with pytest.raises(ValueError):
        rule_nodes(0.0)


def test_segment_nodes_handle_negative_endpoint_powers():
    rule = QuadratureRule(16, 10)
    # int_0^1 (1-x)^(-0.4) dx = 1/0.6
    x, w = segment_nodes(0.0, 1.0, rule, q_upper=-0.4)
    got = float(np.sum(w * (1.0 - x) ** -0.4))
    assert got == pytest.approx(1.0 / 0.6, rel=1e-12)
    # int_0^1 x^(-0.4) dx likewise at the lower end
    x, w = segment_nodes(0.0, 1.0, rule, q_lower=-0.4)
    got = float(np.sum(w * x ** -0.4))
    assert got == pytest.approx(1.0 / 0.6, rel=1e-12)
    # both ends singular at once: the midpoint split leaves a branch
    # point of the smooth cross factor in each half, so convergence is
    # algebraic; the default rule sits below 3e-11 relative here
    x, w = segment_nodes(0.0, 1.0, DEFAULT_RULE, q_lower=-0.3, q_upper=-0.3)
    got = float(np.sum(w * (x * (1.0 - x)) ** -0.3))
    want = math.gamma(0.7) ** 2 / math.gamma(1.4)
    assert got == pytest.approx(want, rel=5e-10)
    with pytest.raises(ValueError):
        segment_nodes(1.0, 1.0)


def test_l2_inner_product_closed_forms():
    k1 = make_exponential(1.0)
    k2 = make_exponential(2.0)
    got = l2_inner_product(k1.slice_at(1.0), k2.slice_at(1.0), 1.0)
    # int_0^1 e^{-(1-s)} e^{-2(1-s)} ds = (1 - e^{-3})/3
    assert got == pytest.approx((1.0 - math.exp(-3.0)) / 3.0, rel=1e-13)


def test_kernel_energy_closed_forms():
    assert kernel_energy(make_constant(2.0), 1.5) == pytest.approx(6.0,
                                                                   rel=1e-13)
    lam = 0.7
    want = (1.0 - math.exp(-2.0 * lam * 2.0)) / (2.0 * lam)
    assert kernel_energy(make_exponential(lam), 2.0) == pytest.approx(
        want, rel=1e-13)
    # bridge: int_0^T ((T0-T)/(T0-s))^2 ds = (T0-T)^2 (1/(T0-T) - 1/T0)
    t0, T = 2.0, 1.0
    want = (t0 - T) ** 2 * (1.0 / (t0 - T) - 1.0 / t0)
    assert kernel_energy(make_bridge(t0), T) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("h", [0.1, 0.25, 0.5, 0.75, 0.9])
@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_fractional_energy_is_T_to_2H(h, T):
    # the substitution turns the squared power-law slice into a constant,
    # so this identity holds to rounding even at h = 0.1
    k = make_riemann_liouville(h)
    assert kernel_energy(k, T) == pytest.approx(T ** (2.0 * h), rel=1e-12)


@pytest.mark.parametrize("maker", [make_riemann_liouville,
                                   make_fbm_molchan_golosov])
def test_gap_slices_match_position_slices(maker):
    k = maker(0.2)
    t = 1.3
    r = np.array([0.5, 1e-2, 1e-6])
    via_gap = k.slice_gap_at(t)(r)
    via_pos = k.slice_at(t)(t - r)
    assert np.allclose(via_gap, via_pos, rtol=1e-9)
    # below one ulp of t the positional form saturates but the gap form
    # keeps resolving the power
    tiny = np.array([1e-30])
    got = float(k.slice_gap_at(t)(tiny)[0, 0])
    assert got > 0.0
    if k.label == "riemann_liouville":
        assert got == pytest.approx(math.sqrt(0.4) * 1e-30 ** -0.3, rel=1e-12)


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_fbm_energy_is_T_to_2H(h, T=1.5):
    # the hypergeometric factor keeps a fractional branch point after
    # the endpoint substitution, so the identity is met at an algebraic
    # rate rather than exactly; refinement must move toward it
    k = make_fbm_molchan_golosov(h)
    want = T ** (2.0 * h)
    got = kernel_energy(k, T)
    assert got == pytest.approx(want, rel=2e-7)
    refined = kernel_energy(k, T, DEFAULT_RULE.refined())
    assert abs(refined - want) < abs(got - want)


def test_gram_matrix_symmetry_and_positivity():
    k = make_exponential([0.5, -0.25, 2.0])
    g = kernel_gram(k, 1.0)
    assert g.shape == (3, 3)
    assert np.allclose(g, g.T, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(g) > 0.0)
    # diagonal entries are the component energies
    for i, lam in enumerate((0.5, -0.25, 2.0)):
        want = (1.0 - math.exp(-2.0 * lam)) / (2.0 * lam)
        assert g[i, i] == pytest.approx(want, rel=1e-12)


def test_gram_cross_terms_mixed_smooth_and_singular():
    k = make_riemann_liouville((0.3, 0.7))
    g = kernel_gram(k, 1.0)
    # int_0^1 c3 c7 (1-s)^{-0.2+0.2} ds = c3 c7
    want = math.sqrt(0.6) * math.sqrt(1.4)
    assert g[0, 1] == pytest.approx(want, rel=1e-10)
    assert g[0, 0] == pytest.approx(1.0, rel=1e-10)
    assert g[1, 1] == pytest.approx(1.0, rel=1e-10)


def test_gram_lower_truncation():
    k = make_constant(1.0)
    g = kernel_gram(k, 1.0, lower=0.25)
    assert g[0, 0] == pytest.approx(0.75, rel=1e-13)


def test_kernel_covariance_closed_forms():
    cov = kernel_covariance(make_constant(1.0), 0.4, 0.9)
    assert cov == pytest.approx(0.4, rel=1e-13)
    t0 = 2.0
    s, u = 0.5, 0.8
    want = (t0 - s) * (t0 - u) * (1.0 / (t0 - s) - 1.0 / t0)
    assert kernel_covariance(make_bridge(t0), s, u) == pytest.approx(
        want, rel=1e-12)


def test_refinement_convergence_for_fractional_kernels():
    # doubling the panels moves a rough-kernel integral by < 1e-6 relative
    k = make_riemann_liouville(0.2)
    coarse = kernel_energy(k, 1.0, DEFAULT_RULE)
    fine = kernel_energy(k, 1.0, DEFAULT_RULE.refined())
    assert abs(fine - coarse) <= 1e-6 * abs(fine)


def test_weights_are_positive_and_absorb_the_declared_power():
    # substituted weights are tuned to integrands carrying the declared
    # endpoint power: against (1-x)^q the rule is exact, while the bare
    # weight sum only approximates the interval length
    x, w = segment_nodes(0.0, 1.0, QuadratureRule(8, 5), q_upper=-0.2)
    assert np.all(w > 0.0)
    assert np.all((x > 0.0) & (x < 1.0))
    got = float(np.sum(w * (1.0 - x) ** -0.2))
    assert got == pytest.approx(1.0 / 0.8, rel=1e-12)
    x, w = rule_nodes(1.0, QuadratureRule(8, 5))
    assert np.all(w > 0.0)
    assert float(np.sum(w)) == pytest.approx(1.0, rel=1e-13)
