"""Linearized update maps, quadratic discrete energies, spectral certificates,
and numerical verification of the matching equivalences.

The reduced kinetic linearization is the scalar three-term recurrence
b*phi_{k+1} + a*phi_k + b*phi_{k-1} = 0 with
    A = (alpha*gamma - beta0^2 - beta0^2*gamma*kappa)/gamma,
    a = C/2 + 2A/h^2,  b = C/4 - A/h^2,  C = -V1''(0).
Dissipation D >= 0 (the closed-loop subtract convention) perturbs the outer
coefficients to b +/- beta0*D/(2*gamma*h^2).

The potential 4x4 map acts on (q_{k-1}, q_k) and is assembled from the
constant mass matrix Mq and potential Hessian KU of the quadratic shaped
Lagrangian via S = Mq/h + (h/4)KU, T = 2Mq/h - (h/2)KU.  Its quadratic
energy E(qa,qb) = h [ (1/2) v^T Mq v + (1/2) qbar^T KU qbar ] with
v = (qb-qa)/h, qbar = (qa+qb)/2 is exactly conserved when D = 0; with
damping it obeys
    E_{k,k+1} = E_{k-1,k} + D*h*((dx_{k-1}+dx_k)/(2h))^2,  x = s + c_x*phi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cartpend import ModelParameters, v1_second
from .core import ConfigurationPoint, SolverSettings, simulate, ZeroForce, MidpointDiscreteLagrangian
from .shaping import (
    ControllerGains,
    DegenerateGainError,
    KineticShapedLagrangian,
    MatchingForce,
    PotentialShapedLagrangian,
    assemble_closed_loop,
    controlled_momentum,
    x_coefficient,
)


class DegenerateLinearizationError(ValueError):
    """The linearized recurrence has a vanishing leading coefficient."""


@dataclass(frozen=True)
class LinearUpdateMap:
    """One-step linear update (q_{k-1}, q_k) -> (q_k, q_{k+1})."""

    matrix: np.ndarray
    h: float

    def eigenvalues(self) -> np.ndarray:
        """Spectrum ordered deterministically by (modulus, angle)."""
        ev = np.linalg.eigvals(self.matrix)
        order = np.lexsort((np.angle(ev), np.abs(ev)))
        return ev[order]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix))))

    def on_unit_circle(self, tol: float = 1e-8) -> bool:
        return bool(np.max(np.abs(np.abs(np.linalg.eigvals(self.matrix)) - 1.0)) <= tol)


# ---------------------------------------------------------------------------
# kinetic (reduced) case

def _kinetic_A(params: ModelParameters, kappa: float) -> float:
    b0 = params.beta(0.0)
    return (params.alpha * params.gamma - b0 * b0 - b0 * b0 * params.gamma * kappa) / params.gamma


def kinetic_recurrence_coeffs(params: ModelParameters, gains: ControllerGains) -> tuple[float, float]:
    """(a, b) of the undamped reduced recurrence."""
    A = _kinetic_A(params, gains.kappa)
    C = -v1_second(params, 0.0)
    h = params.h
    return C / 2.0 + 2.0 * A / h**2, C / 4.0 - A / h**2


def linearized_kinetic_map(params: ModelParameters, gains: ControllerGains) -> LinearUpdateMap:
    """2x2 companion map of the reduced phi recurrence (momentum-independent)."""
    a, b = kinetic_recurrence_coeffs(params, gains)
    if b == 0.0:
        raise DegenerateLinearizationError("leading recurrence coefficient vanishes")
    m = np.array([[0.0, 1.0], [-1.0, -a / b]])
    return LinearUpdateMap(m, params.h)


def damped_kinetic_map(params: ModelParameters, gains: ControllerGains) -> LinearUpdateMap:
    """Reduced map with the dissipation-emulating input folded in."""
    a, b = kinetic_recurrence_coeffs(params, gains)
    h = params.h
    d = params.beta(0.0) * gains.D / (2.0 * params.gamma * h * h)
    c2, c0 = b + d, b - d
    if c2 == 0.0:
        raise DegenerateLinearizationError("leading recurrence coefficient vanishes")
    m = np.array([[0.0, 1.0], [-c0 / c2, -a / c2]])
    return LinearUpdateMap(m, params.h)


@dataclass(frozen=True)
class KineticCondition:
    """Spectral-stability certificate data for kinetic shaping."""

    kappa_crit: float
    sigma_low: float

    def holds_for_kappa(self, kappa: float) -> bool:
        return kappa > self.kappa_crit

    def holds_for_sigma(self, sigma: float) -> bool:
        return self.sigma_low < sigma < 0.0


def kinetic_spectral_condition(params: ModelParameters) -> KineticCondition:
    b0 = params.beta(0.0)
    if b0 == 0.0:
        raise DegenerateLinearizationError("beta(0) = 0: equilibrium uncontrollable")
    ag = params.alpha * params.gamma
    return KineticCondition(kappa_crit=(ag - b0 * b0) / (b0 * b0 * params.gamma),
                            sigma_low=-b0 * b0 / (ag - b0 * b0))


def quadratic_energy_kinetic(params: ModelParameters, gains: ControllerGains,
                             phi_k: float, phi_next: float) -> float:
    """(A/2)(dphi/h)^2 - (C/2) phi_mid^2.

    The difference quotient enters once per h; this normalization is the one
    conserved along linearized_kinetic_map orbits.
    """
    A = _kinetic_A(params, gains.kappa)
    C = -v1_second(params, 0.0)
    return 0.5 * A * ((phi_next - phi_k) / params.h) ** 2 - 0.5 * C * (0.5 * (phi_k + phi_next)) ** 2


# ---------------------------------------------------------------------------
# potential (4x4) case

def potential_mass_matrix(params: ModelParameters, gains: ControllerGains) -> np.ndarray:
    """Constant mass matrix of the quadratic shaped Lagrangian at phi = 0.

    Parametrized by sigma (tau0 = -beta0/(gamma*sigma)); for matched gains
    this equals kappa*beta0.
    """
    if gains.sigma == 0.0 or gains.rho == 0.0:
        raise DegenerateGainError("sigma and rho must be nonzero")
    b0 = params.beta(0.0)
    g = params.gamma
    sg, rh = gains.sigma, gains.rho
    t0 = -b0 / (g * sg)
    k1 = 1.0 + sg + (rh - 1.0) * (1.0 - sg) ** 2
    mff = params.alpha + 2.0 * b0 * t0 + g * t0 * t0 * k1
    mfs = b0 + g * t0 * (1.0 + (rh - 1.0) * (1.0 - sg))
    return np.array([[mff, mfs], [mfs, rh * g]])


def potential_stiffness_matrix(params: ModelParameters, gains: ControllerGains) -> np.ndarray:
    """Hessian of the shaped potential U = (1/2)V1''(0) phi^2 - (eps/2) x^2."""
    v1pp = v1_second(params, 0.0)
    cx = x_coefficient(params, gains)
    e = gains.epsilon
    return np.array([[v1pp - e * cx * cx, -e * cx], [-e * cx, -e]])


def _potential_blocks(params: ModelParameters, gains: ControllerGains,
                      D: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = params.h
    Mq = potential_mass_matrix(params, gains)
    KU = potential_stiffness_matrix(params, gains)
    S = Mq / h + (h / 4.0) * KU
    T = 2.0 * Mq / h - (h / 2.0) * KU
    cx = x_coefficient(params, gains)
    coup = np.outer([cx, 1.0], [cx, 1.0])
    A2 = -S + D / (2.0 * h) * coup
    A0 = -S - D / (2.0 * h) * coup
    return A2, T, A0


def linearized_potential_map(params: ModelParameters, gains: ControllerGains,
                             D: float = 0.0) -> LinearUpdateMap:
    """4x4 map on (phi_{k-1}, s_{k-1}, phi_k, s_k); D is the linear-friction
    coefficient of the damped variant (0 gives the conservative map)."""
    A2, A1, A0 = _potential_blocks(params, gains, D)
    if abs(np.linalg.det(A2)) < 1e-300:
        raise DegenerateLinearizationError("singular leading block")
    A2inv = np.linalg.inv(A2)
    m = np.vstack([
        np.hstack([np.zeros((2, 2)), np.eye(2)]),
        np.hstack([-A2inv @ A0, -A2inv @ A1]),
    ])
    return LinearUpdateMap(m, params.h)


def damped_linear_map(params: ModelParameters, gains: ControllerGains,
                      mode: str) -> LinearUpdateMap:
    """Damped linearization for the requested shaping mode.

    gains.D is the friction coefficient of the linear map itself.  The
    linearized closed loop with discrete dissipation gain D_loop behaves
    like the potential map with D = |rho| * D_loop.
    """
    if mode == "kinetic":
        return damped_kinetic_map(params, gains)
    if mode == "potential":
        return linearized_potential_map(params, gains, D=gains.D)
    raise ValueError(f"unknown mode {mode!r}")


def quadratic_energy_potential(params: ModelParameters, gains: ControllerGains,
                               q_k: np.ndarray, q_next: np.ndarray) -> float:
    """h [ (1/2) v^T Mq v + (1/2) qbar^T KU qbar ] on a configuration pair."""
    h = params.h
    Mq = potential_mass_matrix(params, gains)
    KU = potential_stiffness_matrix(params, gains)
    v = (np.asarray(q_next, float) - np.asarray(q_k, float)) / h
    qbar = 0.5 * (np.asarray(q_k, float) + np.asarray(q_next, float))
    return float(h * (0.5 * v @ Mq @ v + 0.5 * qbar @ KU @ qbar))


@dataclass(frozen=True)
class PotentialCertificate:
    """Spectral condition plus the energy-definiteness certificate."""

    satisfied: bool
    sigma_ok: bool
    rho_ok: bool
    epsilon_ok: bool
    sigma_low: float
    energy_negative_definite: bool

    def __bool__(self) -> bool:
        return self.satisfied


def potential_spectral_condition(params: ModelParameters, gains: ControllerGains,
                                 definiteness_tol: float = 1e-12) -> PotentialCertificate:
    """Window check on (sigma, rho, epsilon) plus definiteness of the
    quadratic energy (both agree; the certificate is the energy side)."""
    cond = kinetic_spectral_condition(params)
    sigma_ok = cond.holds_for_sigma(gains.sigma)
    rho_ok = gains.rho < 0.0
    epsilon_ok = gains.epsilon > 0.0
    neg_def = False
    if gains.sigma != 0.0 and gains.rho != 0.0:
        Mq = potential_mass_matrix(params, gains)
        KU = potential_stiffness_matrix(params, gains)
        scale = max(np.max(np.abs(Mq)), np.max(np.abs(KU)), 1.0)
        neg_def = bool(np.all(np.linalg.eigvalsh(Mq) < -definiteness_tol * scale)
                       and np.all(np.linalg.eigvalsh(KU) < -definiteness_tol * scale))
    return PotentialCertificate(
        satisfied=sigma_ok and rho_ok and epsilon_ok,
        sigma_ok=sigma_ok, rho_ok=rho_ok, epsilon_ok=epsilon_ok,
        sigma_low=cond.sigma_low,
        energy_negative_definite=neg_def,
    )


def energy_balance_check(params: ModelParameters, gains: ControllerGains,
                         states: np.ndarray) -> float:
    """Max residual of the damped energy identity along 4-vector states.

    states[k] = (phi_{k-1}, s_{k-1}, phi_k, s_k) as produced by iterating a
    damped_linear_map matrix.  Uses the resolved identity with increment
    D*h*((dx_{k-1}+dx_k)/(2h))^2.
    """
    z = np.asarray(states, float)
    cx = x_coefficient(params, gains)
    E = np.array([quadratic_energy_potential(params, gains, zk[:2], zk[2:]) for zk in z])
    dx = (z[:, 3] + cx * z[:, 2]) - (z[:, 1] + cx * z[:, 0])
    quad = ((dx[:-1] + dx[1:]) / (2.0 * params.h)) ** 2
    resid = E[1:] - E[:-1] - gains.D * params.h * quad
    return float(np.max(np.abs(resid))) if resid.size else 0.0


def iterate_map(lin_map: LinearUpdateMap, z0: np.ndarray, n: int) -> np.ndarray:
    """Orbit [z0, Mz0, ..., M^n z0] of a linear update map."""
    z = np.asarray(z0, float)
    out = np.empty((n + 1, z.size))
    out[0] = z
    for k in range(n):
        z = lin_map.matrix @ z
        out[k + 1] = z
    return out


# ---------------------------------------------------------------------------
# matching-theorem verification

@dataclass(frozen=True)
class MatchingReport:
    dev_phi: float
    dev_s: float

    @property
    def dev(self) -> float:
        return max(self.dev_phi, self.dev_s)


def verify_matching_equivalence(params: ModelParameters, gains: ControllerGains,
                                variant: str, q0: ConfigurationPoint,
                                q1: ConfigurationPoint, n_steps: int,
                                settings: SolverSettings | None = None,
                                momentum_level: str = "matched") -> MatchingReport:
    """Dual simulation: closed loop vs controlled-Lagrangian DEL.

    variant "thm1": unforced kinetic-shaped DEL started on the controlled
    momentum level mu = p/(1+gamma*kappa) (initial s-difference shifted by
    h*(mu-p)/gamma); momentum_level="physical" keeps the uncontrolled level
    as a negative control.  variant "thm2": the alternative Lagrangian with
    lam = -p at the same initial data.  variant "thm3": potential-shaped DEL
    with the w forcing; deviations of both phi and s are reported.
    """
    settings = settings or SolverSettings()
    h = params.h
    if variant in ("thm1", "thm2"):
        force = assemble_closed_loop(params, gains, "kinetic")
        loop = simulate_pair(params, None, force, q0, q1, n_steps, settings)
        p_level = controlled_momentum(params, gains, q0, q1)
        if variant == "thm1":
            mu = p_level if momentum_level == "physical" else p_level / (1.0 + params.gamma * gains.kappa)
            q1c = ConfigurationPoint(q1.phi, q1.s + h * (mu - p_level) / params.gamma)
            lag = KineticShapedLagrangian(params, gains)
            ctl = simulate_pair(params, lag, ZeroForce(), q0, q1c, n_steps, settings)
        else:
            lag = KineticShapedLagrangian(params, replace(gains, lam=-p_level))
            ctl = simulate_pair(params, lag, ZeroForce(), q0, q1, n_steps, settings)
        dev_phi = max(abs(a.phi - b.phi) for a, b in zip(loop.points, ctl.points))
        return MatchingReport(dev_phi=dev_phi, dev_s=math.inf)
    if variant == "thm3":
        force = assemble_closed_loop(params, gains, "potential")
        loop = simulate_pair(params, None, force, q0, q1, n_steps, settings)
        lag = PotentialShapedLagrangian(params, gains)
        wforce = MatchingForce(params, gains)
        ctl = simulate_pair(params, lag, wforce, q0, q1, n_steps, settings)
        dev_phi = max(abs(a.phi - b.phi) for a, b in zip(loop.points, ctl.points))
        dev_s = max(abs(a.s - b.s) for a, b in zip(loop.points, ctl.points))
        return MatchingReport(dev_phi=dev_phi, dev_s=dev_s)
    raise ValueError(f"unknown variant {variant!r}")


def simulate_pair(params: ModelParameters, lagrangian, force,
                  q0: ConfigurationPoint, q1: ConfigurationPoint, n_steps: int,
                  settings: SolverSettings):
    """Simulate either the plain model (lagrangian=None) or a supplied
    continuous Lagrangian under the given force from the pair (q0, q1)."""
    from .cartpend import CartPendulumModel
    if lagrangian is None:
        model = CartPendulumModel(params)
    else:
        model = MidpointDiscreteLagrangian(lagrangian, params.h)
    return simulate(model, force, q0, q1, n_steps, settings)
