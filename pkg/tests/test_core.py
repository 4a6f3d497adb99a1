"""Core integrator: action sums, residuals, the implicit step, and the solver."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delshape.cartpend import CartPendulumModel, potential
from delshape.core import (
    ConfigurationPoint,
    DiscreteState,
    MidpointDiscreteLagrangian,
    SolverFailure,
    SolverSettings,
    ZeroForce,
    del_residual,
    discrete_action,
    forced_del_residual,
    initialize_from_state,
    newton_solve,
    simulate,
    step,
)

finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


class FreeParticle:
    """L = |v|^2 / 2: no potential, no coupling."""

    def value(self, q, v):
        return 0.5 * (v[0] ** 2 + v[1] ** 2)

    def grad_q(self, q, v):
        return (0.0, 0.0)

    def grad_v(self, q, v):
        return (v[0], v[1])


@pytest.fixture(scope="module")
def model(p_flat):
    return CartPendulumModel(p_flat)


@pytest.fixture(scope="module")
def free_model():
    return MidpointDiscreteLagrangian(FreeParticle(), 0.05)


# ---------------------------------------------------------------------------
# discrete_action

def test_action_on_constant_pair_is_minus_h_times_potential(model, p_flat):
    q = ConfigurationPoint(0.3, -0.7)
    # zero difference kills the kinetic quadratic, leaving -h V(q)
    assert discrete_action(model, [q, q]) == pytest.approx(
        -p_flat.h * potential(p_flat, q), abs=1e-15)


def test_action_three_points_is_sum_of_two_terms(model):
    qs = [ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.12, 0.01),
          ConfigurationPoint(0.13, 0.03)]
    assert discrete_action(model, qs) == pytest.approx(
        model.ld(qs[0], qs[1]) + model.ld(qs[1], qs[2]), abs=1e-15)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(vals=st.lists(st.tuples(finite, finite), min_size=5, max_size=5))
def test_action_matches_resummation(p_flat, vals):
    m = CartPendulumModel(p_flat)
    path = [ConfigurationPoint(a, b) for a, b in vals]
    resum = sum(m.ld(path[k], path[k + 1]) for k in range(4))
    assert discrete_action(m, path) == pytest.approx(resum, abs=1e-12)


def test_action_rejects_short_path(model):
    with pytest.raises(ValueError):
        discrete_action(model, [ConfigurationPoint(0.0, 0.0)])


# ---------------------------------------------------------------------------
# del_residual / forced_del_residual

def test_equilibrium_residual_is_zero(model):
    q = ConfigurationPoint(0.0, 0.0)
    assert np.allclose(del_residual(model, q, q, q), 0.0, atol=1e-15)


def test_residual_vanishes_at_stepped_triple(model):
    state = DiscreteState(ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.102, 0.003))
    qn = step(model, ZeroForce(), state, SolverSettings(tol=1e-12))
    r = del_residual(model, state.q_prev, state.q_curr, qn)
    assert np.max(np.abs(r)) <= 1e-12


@settings(max_examples=25, deadline=None, derandomize=True)
@given(q0=st.tuples(finite, finite), d=st.tuples(finite, finite))
def test_free_particle_arithmetic_sequence_is_a_solution(free_model, q0, d):
    pts = [ConfigurationPoint(q0[0] + k * d[0], q0[1] + k * d[1]) for k in range(3)]
    assert np.allclose(del_residual(free_model, *pts), 0.0, atol=1e-12)


def test_forced_residual_with_zero_force_equals_unforced(model):
    trip = (ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.11, 0.02),
            ConfigurationPoint(0.13, 0.05))
    assert np.array_equal(forced_del_residual(model, ZeroForce(), *trip),
                          del_residual(model, *trip))


class SplitConstantForce:
    """f1 = (0, u1), f2 = (0, u2) regardless of the points."""

    def __init__(self, u1: float, u2: float):
        self.u1, self.u2 = u1, u2

    def f1(self, qa, qb):
        return np.array([0.0, self.u1])

    def f2(self, qa, qb):
        return np.array([0.0, self.u2])


@settings(max_examples=25, deadline=None, derandomize=True)
@given(u1=finite, u2=finite)
def test_force_terms_enter_additively_in_the_cart_slot(model, u1, u2):
    trip = (ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.11, 0.02),
            ConfigurationPoint(0.13, 0.05))
    base = del_residual(model, *trip)
    forced = forced_del_residual(model, SplitConstantForce(u1, u2), *trip)
    assert forced[0] == pytest.approx(base[0], abs=1e-15)
    assert forced[1] == pytest.approx(base[1] + u1 + u2, abs=1e-12)


def test_cancellation_force_zeroes_the_residual(model):
    trip = (ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.11, 0.02),
            ConfigurationPoint(0.13, 0.05))
    r = del_residual(model, *trip)

    class Cancel:
        def f1(self, qa, qb):
            return -r

        def f2(self, qa, qb):
            return np.zeros(2)

    assert np.allclose(forced_del_residual(model, Cancel(), *trip), 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# step / initialize_from_state

def test_step_from_equilibrium_stays(model):
    q = ConfigurationPoint(0.0, 0.0)
    qn = step(model, ZeroForce(), DiscreteState(q, q))
    assert abs(qn.phi) <= 1e-12 and abs(qn.s) <= 1e-12


def test_step_free_particle_extends_linearly(free_model):
    qn = step(free_model, ZeroForce(),
              DiscreteState(ConfigurationPoint(0.0, 0.0), ConfigurationPoint(0.01, -0.02)))
    assert qn.phi == pytest.approx(0.02, abs=1e-12)
    assert qn.s == pytest.approx(-0.04, abs=1e-12)


def test_step_agrees_with_independent_root_finder(model):
    scipy_root = pytest.importorskip("scipy.optimize").root
    state = DiscreteState(ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.102, 0.003))
    qn = step(model, ZeroForce(), state, SolverSettings(tol=1e-12))

    def resid(x):
        return del_residual(model, state.q_prev, state.q_curr, ConfigurationPoint(x[0], x[1]))

    sol = scipy_root(resid, [0.104, 0.006], method="hybr", tol=1e-13)
    assert sol.success
    assert max(abs(qn.phi - sol.x[0]), abs(qn.s - sol.x[1])) <= 1e-8


def test_shrinking_tol_shrinks_the_returned_point_perturbation(model):
    state = DiscreteState(ConfigurationPoint(0.1, 0.0), ConfigurationPoint(0.102, 0.003))
    ref = step(model, ZeroForce(), state, SolverSettings(tol=1e-13))

    def dist(tol: float) -> float:
        q = step(model, ZeroForce(), state, SolverSettings(tol=tol))
        return max(abs(q.phi - ref.phi), abs(q.s - ref.s))

    coarse, mid, fine = dist(1e-3), dist(1e-6), dist(1e-10)
    assert coarse > 1e2 * mid  # two orders of tol buy at least two of accuracy here
    assert mid >= fine
    assert fine <= 1e-10


def test_step_reports_solver_failure_with_residual_norm(free_model):
    def bad(x):
        return np.array([math.nan, math.nan])

    with pytest.raises(SolverFailure):
        newton_solve(bad, [0.0, 0.0], SolverSettings(max_iter=5))


def test_initialize_rest_at_equilibrium_stays(model):
    q1 = initialize_from_state(model, ZeroForce(), ConfigurationPoint(0.0, 0.0), (0.0, 0.0))
    assert abs(q1.phi) <= 1e-12 and abs(q1.s) <= 1e-12


def test_initialize_free_particle_is_euler_exact(free_model):
    q1 = initialize_from_state(free_model, ZeroForce(), ConfigurationPoint(0.2, -0.1),
                               (0.3, 0.7))
    assert q1.phi == pytest.approx(0.2 + 0.05 * 0.3, abs=1e-12)
    assert q1.s == pytest.approx(-0.1 + 0.05 * 0.7, abs=1e-12)


def test_initialize_velocity_consistency_order(p_flat):
    """Implied velocity (q1-q0)/h converges to v0 at first order in h."""
    errs = []
    for h in (0.05, 0.025, 0.0125):
        params = type(p_flat)(m=p_flat.m, M=p_flat.M, l=p_flat.l, psi=0.0, g=p_flat.g, h=h)
        m = CartPendulumModel(params)
        q0 = ConfigurationPoint(0.1, 0.0)
        q1 = initialize_from_state(m, ZeroForce(), q0, (0.1, 0.0), SolverSettings(tol=1e-13))
        errs.append(max(abs((q1.phi - q0.phi) / h - 0.1), abs((q1.s - q0.s) / h)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 0.8


# ---------------------------------------------------------------------------
# simulate

def test_simulate_single_step_from_equilibrium_is_constant(model):
    q = ConfigurationPoint(0.0, 0.0)
    traj = simulate(model, ZeroForce(), q, q, 1)
    assert len(traj.points) == 2
    assert abs(traj.points[1].phi) <= 1e-12


def test_simulate_replay_reverification(model):
    tol = 1e-11
    q0 = ConfigurationPoint(0.1, 0.0)
    q1 = initialize_from_state(model, ZeroForce(), q0, (0.0, 0.05), SolverSettings(tol=tol))
    traj = simulate(model, ZeroForce(), q0, q1, 200, SolverSettings(tol=tol))
    worst = max(np.max(np.abs(del_residual(model, *traj.points[k - 1:k + 2])))
                for k in range(1, len(traj.points) - 1))
    assert worst <= tol


def test_simulate_propagates_failing_step_index(model):
    bad = SolverSettings(tol=1e-10, max_iter=1)
    with pytest.raises(SolverFailure) as exc:
        simulate(model, ZeroForce(), ConfigurationPoint(1.2, 0.0),
                 ConfigurationPoint(-0.9, 4.0), 10, bad)
    assert exc.value.step_index is not None


# ---------------------------------------------------------------------------
# newton_solve

def test_newton_identity_shift_solves_in_one_move():
    out = newton_solve(lambda x: x - np.array([2.5, -1.0]), [0.0, 0.0])
    assert np.allclose(out, [2.5, -1.0], atol=1e-12)


def test_newton_scalar_square_root():
    out = newton_solve(lambda x: np.array([x[0] ** 2 - 4.0]), [3.0])
    assert out[0] == pytest.approx(2.0, abs=1e-10)


def test_newton_coupled_polynomial_with_constructed_root():
    r = np.array([1.5, -0.5])

    def resid(x):
        return np.array([x[0] ** 2 - x[1] - (r[0] ** 2 - r[1]),
                         x[0] + x[1] ** 3 - (r[0] + r[1] ** 3)])

    out = newton_solve(resid, [1.0, 0.0])
    assert np.allclose(out, r, atol=1e-10)


def test_newton_deterministic():
    f = lambda x: np.array([math.sin(x[0]) - 0.3, x[1] ** 3 - 0.2])
    a = newton_solve(f, [0.1, 0.9])
    b = newton_solve(f, [0.1, 0.9])
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# long-run structure preservation

def test_cyclic_momentum_conserved_over_1e4_steps(model, p_flat):
    """With a level plane the cart coordinate is cyclic; its discrete momentum
    must hold to 1e-8 across ten thousand steps."""
    tol = SolverSettings(tol=1e-12)
    q0 = ConfigurationPoint(0.1, 0.0)
    q1 = initialize_from_state(model, ZeroForce(), q0, (0.0, 0.05), tol)
    traj = simulate(model, ZeroForce(), q0, q1, 10_000, tol)
    ps = [model.momentum(a, b) for a, b in zip(traj.points[:-1], traj.points[1:])]
    assert max(abs(p - ps[0]) for p in ps) <= 1e-8


def test_discrete_energy_stays_in_a_band_over_1e5_steps(model):
    q0 = ConfigurationPoint(0.1, 0.0)
    q1 = initialize_from_state(model, ZeroForce(), q0, (0.0, 0.05))
    traj = simulate(model, ZeroForce(), q0, q1, 100_000)
    E = np.array([model.energy(a, b) for a, b in zip(traj.points[:-1], traj.points[1:])])
    band_first = E[:10_000].max() - E[:10_000].min()
    band_all = E.max() - E.min()
    # oscillation, not growth: the late band must not widen past the early one
    assert band_all <= 1.5 * band_first
    assert band_all <= 0.2 * abs(E[0])


def test_time_reversed_trajectory_also_solves_the_recurrence(model):
    tol = SolverSettings(tol=1e-12)
    q0 = ConfigurationPoint(0.1, 0.0)
    q1 = initialize_from_state(model, ZeroForce(), q0, (0.0, 0.05), tol)
    traj = simulate(model, ZeroForce(), q0, q1, 50, tol)
    rev = traj.points[::-1]
    worst = max(np.max(np.abs(del_residual(model, *rev[k - 1:k + 2])))
                for k in range(1, len(rev) - 1))
    assert worst <= 1e-10
