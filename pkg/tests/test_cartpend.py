"""Cart-pendulum model: metric coefficients, potentials, discrete Lagrangian."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from delshape import (
    CartPendulumModel,
    ConfigurationPoint,
    KineticCoefficients,
    ModelParameters,
    accel_forced,
    continuous_lagrangian,
    discrete_lagrangian,
    metric_coeffs,
    potential,
)
from delshape.cartpend import v1_second, v2_prime

Q = ConfigurationPoint


def test_metric_values_reference_parameters(p_flat: ModelParameters) -> None:
    assert p_flat.alpha == pytest.approx(0.0064715, rel=1e-12)
    assert p_flat.gamma == pytest.approx(0.58, rel=1e-12)
    # beta is maximal when the pendulum is normal to the incline
    assert p_flat.beta(p_flat.psi) == pytest.approx(0.0301, rel=1e-12)
    assert p_flat.ml == pytest.approx(0.0301, rel=1e-12)


def test_beta_vanishes_a_quarter_turn_from_the_incline_normal(
    p_incline: ModelParameters,
) -> None:
    assert abs(p_incline.beta(p_incline.psi + math.pi / 2)) < 1e-12
    assert abs(p_incline.beta_prime(p_incline.psi)) < 1e-12


def test_metric_determinant_identity(p_incline: ModelParameters) -> None:
    """alpha*gamma - beta(phi)^2 = alpha (M + m sin^2(phi - psi)) > 0."""
    p = p_incline
    phis = np.linspace(-math.pi, math.pi, 10_000)
    for phi in phis:
        det = p.alpha * p.gamma - p.beta(phi) ** 2
        expected = p.alpha * (p.M + p.m * math.sin(phi - p.psi) ** 2)
        assert det == pytest.approx(expected, rel=1e-12)
        assert det > 0.0


def test_metric_coeffs_and_definiteness_guard(p_flat: ModelParameters) -> None:
    c = metric_coeffs(p_flat, 0.3)
    assert c.alpha == p_flat.alpha
    assert c.beta == p_flat.beta(0.3)
    assert c.gamma == p_flat.gamma
    with pytest.raises(ValueError):
        KineticCoefficients(1.0, 2.0, 1.0)  # 1*1 - 4 < 0
    with pytest.raises(ValueError):
        KineticCoefficients(-1.0, 0.0, 1.0)


def test_parameter_validation() -> None:
    with pytest.raises(ValueError):
        ModelParameters(m=0.0, M=0.44, l=0.215)
    with pytest.raises(ValueError):
        ModelParameters(m=0.14, M=0.44, l=0.215, psi=math.pi / 2)


def test_potential_has_maximum_at_upright(p_flat: ModelParameters) -> None:
    # inverted pendulum: upright equilibrium sits at the potential maximum
    assert v1_second(p_flat, 0.0) < 0.0
    mgl = p_flat.m * p_flat.g * p_flat.l
    assert potential(p_flat, Q(0.0, 0.0)) == pytest.approx(mgl, rel=1e-12)
    for phi in (0.4, -0.7, 1.2):
        assert potential(p_flat, Q(phi, 0.0)) < mgl


def test_potential_incline_tilt(p_flat: ModelParameters, p_incline: ModelParameters) -> None:
    # flat case: no s dependence
    assert potential(p_flat, Q(0.2, 3.0)) == potential(p_flat, Q(0.2, -5.0))
    # inclined case: moving up the slope by 1 lowers V by (M+m) g sin(psi)
    p = p_incline
    mgl = p.m * p.g * p.l
    drop = (p.M + p.m) * p.g * math.sin(p.psi)
    assert potential(p, Q(0.0, 1.0)) == pytest.approx(mgl - drop, rel=1e-12)
    assert v2_prime(p) == pytest.approx(-drop, rel=1e-12)


def test_continuous_lagrangian_structure(p_incline: ModelParameters) -> None:
    p = p_incline
    q = Q(0.37, -0.8)
    assert continuous_lagrangian(p, q, (0.0, 0.0)) == pytest.approx(
        -potential(p, q), rel=1e-13
    )
    # kinetic part is a quadratic form: L(q, cv) - L(q, 0) scales by c^2
    v = (0.9, -1.3)
    kin = continuous_lagrangian(p, q, v) + potential(p, q)
    kin3 = continuous_lagrangian(p, q, (3.0 * v[0], 3.0 * v[1])) + potential(p, q)
    assert kin3 == pytest.approx(9.0 * kin, rel=1e-12)
    # reassembly from the exposed coefficients
    c = metric_coeffs(p, q.phi)
    manual = 0.5 * (c.alpha * v[0] ** 2 + 2 * c.beta * v[0] * v[1] + c.gamma * v[1] ** 2)
    assert continuous_lagrangian(p, q, v) == pytest.approx(
        manual - potential(p, q), rel=1e-13
    )


def test_discrete_lagrangian_wrapper_and_symmetry(p_incline: ModelParameters) -> None:
    p = p_incline
    model = CartPendulumModel(p)
    qa, qb = Q(0.11, -0.2), Q(0.17, 0.05)
    assert discrete_lagrangian(p, qa, qb) == model.ld(qa, qb)
    # constant pair: no motion, pure potential over one step
    q = Q(0.25, 1.4)
    assert discrete_lagrangian(p, q, q) == pytest.approx(
        -p.h * potential(p, q), rel=1e-12
    )
    # midpoint rule is symmetric under endpoint swap
    assert discrete_lagrangian(p, qa, qb) == discrete_lagrangian(p, qb, qa)


def test_discrete_gradients_match_finite_differences(p_incline: ModelParameters) -> None:
    model = CartPendulumModel(p_incline)
    rng = np.random.default_rng(3)
    eps = 1e-6
    for _ in range(8):
        qa = Q(*rng.uniform(-0.5, 0.5, 2))
        qb = Q(*rng.uniform(-0.5, 0.5, 2))
        d1 = model.d1(qa, qb)
        d2 = model.d2(qa, qb)
        for i in range(2):
            bump = (eps, 0.0) if i == 0 else (0.0, eps)
            qa_p = Q(qa.phi + bump[0], qa.s + bump[1])
            qa_m = Q(qa.phi - bump[0], qa.s - bump[1])
            fd = (model.ld(qa_p, qb) - model.ld(qa_m, qb)) / (2 * eps)
            assert d1[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)
            qb_p = Q(qb.phi + bump[0], qb.s + bump[1])
            qb_m = Q(qb.phi - bump[0], qb.s - bump[1])
            fd = (model.ld(qa, qb_p) - model.ld(qa, qb_m)) / (2 * eps)
            assert d2[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(
    phi_a=st.floats(-1.0, 1.0),
    phi_b=st.floats(-1.0, 1.0),
    s_a=st.floats(-2.0, 2.0),
    ds=st.floats(-0.5, 0.5),
)
def test_flat_model_ignores_cart_position(
    phi_a: float, phi_b: float, s_a: float, ds: float
) -> None:
    """On a flat track s is cyclic: the s-slopes at the two endpoints cancel."""
    model = CartPendulumModel(ModelParameters(m=0.14, M=0.44, l=0.215, psi=0.0))
    qa, qb = Q(phi_a, s_a), Q(phi_b, s_a + ds)
    d1 = model.d1(qa, qb)
    d2 = model.d2(qa, qb)
    assert abs(d1[1] + d2[1]) < 1e-12


def test_discrete_lagrangian_is_second_order_quadrature(
    p_incline: ModelParameters,
) -> None:
    """Against adaptive quadrature along a straight segment, error ~ h^2."""
    qa, qb = Q(0.2, -0.3), Q(0.5, 0.1)

    def segment_error(h: float) -> float:
        p = ModelParameters(m=0.14, M=0.44, l=0.215, psi=p_incline.psi, h=h)
        v = ((qb.phi - qa.phi) / h, (qb.s - qa.s) / h)

        def integrand(t: float) -> float:
            q = Q(qa.phi + t * v[0], qa.s + t * v[1])
            return continuous_lagrangian(p, q, v)

        exact, _ = quad(integrand, 0.0, h, epsabs=1e-14, epsrel=1e-13)
        return abs(discrete_lagrangian(p, qa, qb) - exact) / abs(exact)

    errs = [segment_error(h) for h in (0.08, 0.04, 0.02)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.9 < o < 2.1 for o in orders)


def test_beta_integral_is_an_antiderivative(p_incline: ModelParameters) -> None:
    p = p_incline
    assert p.beta_integral(0.0) == 0.0
    for phi in (-1.1, 0.3, 0.9):
        val, _ = quad(p.beta, 0.0, phi, epsabs=1e-14)
        assert p.beta_integral(phi) == pytest.approx(val, abs=1e-12)


def test_forced_accelerations_solve_the_force_balance(
    p_incline: ModelParameters,
) -> None:
    p = p_incline
    # holding force against gravity keeps the upright rest point still
    a = accel_forced(p, (0.0, 0.0), (0.0, 0.0), v2_prime(p))
    assert np.allclose(a, 0.0, atol=1e-15)
    # generic point: multiply back through the mass matrix
    q, v, u = (0.4, 1.0), (0.7, -0.2), 0.9
    a = accel_forced(p, q, v, u)
    b = p.beta(q[0])
    lhs_phi = p.alpha * a[0] + b * a[1]
    lhs_s = b * a[0] + p.gamma * a[1]
    rhs_phi = p.m * p.g * p.l * math.sin(q[0])
    rhs_s = u - v2_prime(p) - p.beta_prime(q[0]) * v[0] ** 2
    assert lhs_phi == pytest.approx(rhs_phi, rel=1e-12)
    assert lhs_s == pytest.approx(rhs_s, rel=1e-12)
