"""Fixed-step RK4 with dense output, backward adjoint integration, and
composite Gauss-Legendre quadrature."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from troop.errors import DimensionMismatch, NonFiniteState
from troop.integrate import (
    QuadratureRule,
    integrate_adjoint_backward,
    integrate_forward,
    quad_integrate,
)
from troop.system import toy_model


# ------------------------------------------------------------- forward


def test_forward_constant_rhs_exact():
    c = np.array([1.0, -2.0])
    traj = integrate_forward(lambda t, x: c, np.zeros(2), 0.0, 3.0, 0.25)
    assert_allclose(traj(3.0), 3.0 * c, atol=1e-13)
    assert_allclose(traj(1.7), 1.7 * c, atol=1e-13)


def test_forward_exponential_decay():
    traj = integrate_forward(lambda t, x: -x, np.array([1.0]), 0.0, 1.0, 1e-3)
    assert abs(traj(1.0)[0] - np.exp(-1.0)) <= 1e-8


def test_forward_fourth_order_convergence():
    sys = toy_model()
    x0 = np.ones(3)
    t1 = 0.5

    def endpoint(step):
        return integrate_forward(lambda t, x: sys.rhs(x, None, t), x0, 0.0, t1, step)(t1)

    ref = endpoint(0.5 / 512)
    err_h = np.linalg.norm(endpoint(0.05) - ref)
    err_h2 = np.linalg.norm(endpoint(0.025) - ref)
    assert err_h / err_h2 >= 10.0  # nominal ratio 16 for a 4th-order method


def test_forward_grid_last_step_shortened():
    traj = integrate_forward(lambda t, x: -x, np.array([1.0]), 0.0, 1.0, 0.3)
    assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-15)


def test_forward_invalid_grid_raises():
    with pytest.raises(DimensionMismatch):
        integrate_forward(lambda t, x: -x, np.array([1.0]), 0.0, 1.0, 0.0)
    with pytest.raises(DimensionMismatch):
        integrate_forward(lambda t, x: -x, np.array([1.0]), 1.0, 1.0, 0.1)


# -------------------------------------------------------- dense output


def test_dense_output_nodes_and_interior():
    traj = integrate_forward(lambda t, x: -x, np.array([1.0]), 0.0, 2.0, 0.1)
    # exact at the stored nodes
    for t, x in zip(traj.times, traj.states):
        assert_allclose(traj(float(t)), x, atol=1e-14)
    # cubic Hermite interior error is O(step^4)
    for t in (0.05, 0.333, 1.234, 1.95):
        assert abs(traj(t)[0] - np.exp(-t)) <= 1e-5
    # continuity across a node
    eps = 1e-10
    assert abs(traj(0.1 - eps)[0] - traj(0.1 + eps)[0]) <= 1e-8


def test_dense_output_outside_span_raises():
    traj = integrate_forward(lambda t, x: -x, np.array([1.0]), 0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        traj(1.5)
    with pytest.raises(ValueError):
        traj(-0.5)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # divergence is the point
def test_nonfinite_state_reports_time():
    # x' = x^2 from x(0) = 1.5 blows up at t = 2/3 < 1
    with pytest.raises(NonFiniteState) as err:
        integrate_forward(lambda t, x: x**2, np.array([1.5]), 0.0, 1.0, 1e-3)
    assert err.value.t is not None
    assert 0.0 < err.value.t <= 1.0


# ------------------------------------------------------------- adjoint


def test_adjoint_zero_generator_is_constant():
    lam_end = np.array([2.0, -1.0])
    lam = integrate_adjoint_backward(
        lambda t, lam_t: np.zeros(2), lam_end, 1.0, 0.0, 0.05
    )
    assert_allclose(lam(0.0), lam_end, atol=1e-14)
    assert_allclose(lam(0.42), lam_end, atol=1e-14)


def test_adjoint_scalar_growth_backward():
    # -lam' = a lam integrated from t_hi down to t_lo gives
    # lam(t) = lam(t_hi) * exp(a (t_hi - t)).
    a = 0.8
    lam = integrate_adjoint_backward(
        lambda t, lam_t: a * lam_t, np.array([1.0]), 2.0, 0.5, 1e-3
    )
    assert abs(lam(0.5)[0] - np.exp(a * 1.5)) <= 1e-8
    assert abs(lam(1.0)[0] - np.exp(a * 1.0)) <= 1e-8


def test_adjoint_forward_duality_invariant():
    # For v' = A v and -lam' = A^T lam the pairing <lam(t), v(t)> is constant.
    rng = np.random.default_rng(17)
    a = rng.standard_normal((5, 5))
    v0 = rng.standard_normal(5)
    lam_end = rng.standard_normal(5)
    v = integrate_forward(lambda t, x: a @ x, v0, 0.0, 1.0, 1e-3)
    lam = integrate_adjoint_backward(lambda t, l: a.T @ l, lam_end, 1.0, 0.0, 1e-3)
    pairings = [float(lam(t) @ v(t)) for t in np.linspace(0.0, 1.0, 9)]
    assert np.max(np.abs(np.diff(pairings))) <= 1e-8 * max(1.0, abs(pairings[0]))


# ---------------------------------------------------------- quadrature


def test_quadrature_constant_and_cubic():
    rule1 = QuadratureRule.gauss_legendre(1)
    assert_allclose(quad_integrate(rule1, lambda t: 1.0, -2.0, 5.0), 7.0, rtol=1e-14)
    rule2 = QuadratureRule.gauss_legendre(2)
    # 2-point rule is exact through degree 3
    assert_allclose(quad_integrate(rule2, lambda t: t**3, 0.0, 1.0), 0.25, rtol=1e-13)


def test_quadrature_cosine():
    val4 = quad_integrate(QuadratureRule.gauss_legendre(4), np.cos, 0.0, np.pi / 2.0)
    assert abs(val4 - 1.0) <= 1e-7
    val6 = quad_integrate(QuadratureRule.gauss_legendre(6), np.cos, 0.0, np.pi / 2.0)
    assert abs(val6 - 1.0) <= 1e-12


@pytest.mark.parametrize("order", range(1, 11))
def test_quadrature_exact_to_design_degree(order):
    # q-point rule integrates t^(2q-1) on [0, 1] exactly: value 1/(2q).
    deg = 2 * order - 1
    rule = QuadratureRule.gauss_legendre(order)
    val = quad_integrate(rule, lambda t: t**deg, 0.0, 1.0)
    assert_allclose(val, 1.0 / (deg + 1), rtol=1e-12)


def test_quadrature_composite_resolves_sharp_exponential():
    # A single 4-point panel cannot follow exp(15 t) on [0, 1]; sixteen
    # panels of the same order can.
    exact = (np.exp(15.0) - 1.0) / 15.0
    f = lambda t: np.exp(15.0 * t)
    coarse = quad_integrate(QuadratureRule.gauss_legendre(4), f, 0.0, 1.0)
    fine = quad_integrate(QuadratureRule.gauss_legendre(4, panels=16), f, 0.0, 1.0)
    assert abs(coarse - exact) / exact > 1e-2
    assert abs(fine - exact) / exact <= 1e-8


def test_quadrature_composite_weights_partition():
    rule = QuadratureRule.gauss_legendre(3, panels=5)
    assert rule.nodes.shape == (15,)
    assert_allclose(np.sum(rule.weights), 2.0, rtol=1e-13)
    assert np.all(np.diff(rule.nodes) > 0)


def test_quadrature_array_valued():
    rule = QuadratureRule.gauss_legendre(3)
    out = quad_integrate(rule, lambda t: np.array([[t, 1.0], [0.0, t**2]]), 0.0, 2.0)
    assert out.shape == (2, 2)
    assert_allclose(out, [[2.0, 2.0], [0.0, 8.0 / 3.0]], rtol=1e-12)


def test_quadrature_invalid_parameters_raise():
    with pytest.raises(DimensionMismatch):
        QuadratureRule.gauss_legendre(0)
    with pytest.raises(DimensionMismatch):
        QuadratureRule.gauss_legendre(11)
    with pytest.raises(DimensionMismatch):
        QuadratureRule.gauss_legendre(2, panels=0)
