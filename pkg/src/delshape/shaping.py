"""Controlled-Lagrangian constructions for the cart-pendulum.

Kinetic shaping (velocity shift by tau = kappa*beta with parameter sigma,
plus an alternative variant with a momentum-shift term), potential shaping
(parameters rho, epsilon acting through the shaped variable y), the discrete
control inputs that realize them in closed loop, the matching forcing term
w_k, and dissipation-emulating additions.

Conventions established by the matching verification suite:
  - closed-loop forced residual: (DEL_phi, DEL_s + u_k) = 0,
  - kinetic u_k = -[gamma*Dphi_k*tau(phi_{k+1/2}) - gamma*Dphi_{k-1}*tau(phi_{k-1/2})]/h,
  - potential u_k adds h*V2' and -(h/2rho)[V_eps'(y_{k+1/2}) + V_eps'(y_{k-1/2})],
  - dissipation is subtracted from u_k (the sign that damps the closed loop),
  - w_k uses +J_k / -J_{k-1} brackets and half-weighted tau' terms (the
    combination that achieves exact discrete matching).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .cartpend import ModelParameters, v1, v1_prime, v2, v2_prime
from .core import ConfigurationPoint, MidpointDiscreteLagrangian, Vec2


class DegenerateGainError(ValueError):
    """A gain combination makes a shaping construction undefined."""


class ConfigurationError(ValueError):
    """Gains inconsistent with the requested closed-loop mode."""


@dataclass(frozen=True)
class ControllerGains:
    """Shaping gains and momentum levels.

    kappa, sigma drive kinetic shaping; rho, epsilon potential shaping;
    lam is the momentum-shift coefficient of the alternative kinetic
    variant; D the dissipation gain; p and mu the physical and controlled
    momentum levels.
    """

    kappa: float = 0.0
    sigma: float = 0.0
    rho: float = 1.0
    epsilon: float = 0.0
    lam: float = 0.0
    D: float = 0.0
    p: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kappa", "sigma", "rho", "epsilon", "lam", "D", "p", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"gain {name} must be finite")


def kinetic_matching_gains(params: ModelParameters, kappa: float, p: float = 0.0) -> tuple[float, float]:
    """Matched (sigma, mu) for kinetic shaping at momentum level p."""
    if kappa == 0.0:
        raise DegenerateGainError("kappa must be nonzero for kinetic matching")
    if 1.0 + params.gamma * kappa == 0.0:
        raise DegenerateGainError("1 + gamma*kappa vanishes: matching degenerate")
    return -1.0 / (params.gamma * kappa), p / (1.0 + params.gamma * kappa)


def alternative_matching_gains(params: ModelParameters, kappa: float, p: float = 0.0) -> tuple[float, float]:
    """Matched (sigma, lambda) for the alternative kinetic variant."""
    sigma, _ = kinetic_matching_gains(params, kappa, p)
    return sigma, -p


def matched_gains(
    params: ModelParameters,
    kappa: float,
    rho: float = 1.0,
    epsilon: float = 0.0,
    D: float = 0.0,
    p: float = 0.0,
) -> ControllerGains:
    """ControllerGains with sigma and mu filled from the matching relations."""
    sigma, mu = kinetic_matching_gains(params, kappa, p)
    return ControllerGains(kappa=kappa, sigma=sigma, rho=rho, epsilon=epsilon,
                           D=D, p=p, mu=mu)


def tau(params: ModelParameters, kappa: float, phi: float) -> float:
    return kappa * params.beta(phi)


def tau_prime(params: ModelParameters, kappa: float, phi: float) -> float:
    return kappa * params.beta_prime(phi)


def _cy(params: ModelParameters, gains: ControllerGains) -> float:
    if gains.sigma == 0.0 or gains.rho == 0.0:
        raise DegenerateGainError("sigma and rho must be nonzero for the shaped variable")
    return (1.0 / gains.sigma - (gains.rho - 1.0) / gains.rho) / params.gamma


def y_of(params: ModelParameters, gains: ControllerGains, q: ConfigurationPoint) -> float:
    """Shaped group variable: s minus the exact integral of the beta shift."""
    return q.s - _cy(params, gains) * params.beta_integral(q.phi)


def y_phi(params: ModelParameters, gains: ControllerGains, phi: float) -> float:
    return -_cy(params, gains) * params.beta(phi)


def x_of(params: ModelParameters, gains: ControllerGains, q: ConfigurationPoint) -> float:
    """Linearization of y at phi = 0: s + c_x*phi."""
    return q.s + x_coefficient(params, gains) * q.phi


def x_coefficient(params: ModelParameters, gains: ControllerGains) -> float:
    return -_cy(params, gains) * params.beta(0.0)


def shaped_potential(gains: ControllerGains, y: float) -> float:
    """V_eps(y) = -(epsilon/2) y^2, the symmetry-breaking potential."""
    return -0.5 * gains.epsilon * y * y


def shaped_potential_prime(gains: ControllerGains, y: float) -> float:
    return -gains.epsilon * y


class KineticShapedLagrangian:
    """Continuous kinetic-shaped Lagrangian.

    L(q, v) of the plain model evaluated at the shifted velocity
    (phid, sd + tau*phid), plus (sigma/2)*gamma*(tau*phid)^2, plus the
    alternative-variant term lam*tau*phid.
    """

    def __init__(self, params: ModelParameters, gains: ControllerGains):
        self.params = params
        self.gains = gains

    def value(self, q: Vec2, v: Vec2) -> float:
        p, gn = self.params, self.gains
        f, s = q
        fd, sd = v
        t = tau(p, gn.kappa, f)
        b = p.beta(f)
        c = sd + t * fd
        kin = 0.5 * p.alpha * fd * fd + b * fd * c + 0.5 * p.gamma * c * c
        kin += 0.5 * gn.sigma * p.gamma * (t * fd) ** 2
        kin += gn.lam * t * fd
        return kin - v1(p, f) - v2(p, s)

    def grad_q(self, q: Vec2, v: Vec2) -> Vec2:
        p, gn = self.params, self.gains
        f = q[0]
        fd, sd = v
        t = tau(p, gn.kappa, f)
        tp = tau_prime(p, gn.kappa, f)
        b = p.beta(f)
        bp = p.beta_prime(f)
        c = sd + t * fd
        dphi = (bp * fd * c + (b * fd + p.gamma * c) * tp * fd
                + gn.sigma * p.gamma * t * tp * fd * fd
                - v1_prime(p, f) + gn.lam * tp * fd)
        return (dphi, -v2_prime(p))

    def grad_v(self, q: Vec2, v: Vec2) -> Vec2:
        p, gn = self.params, self.gains
        f = q[0]
        fd, sd = v
        t = tau(p, gn.kappa, f)
        b = p.beta(f)
        c = sd + t * fd
        dfd = (p.alpha * fd + b * c + b * fd * t + p.gamma * c * t
               + gn.sigma * p.gamma * t * t * fd + gn.lam * t)
        return (dfd, b * fd + p.gamma * c)


class PotentialShapedLagrangian:
    """Continuous potential-shaped Lagrangian.

    Kinetic-shaped kinetic energy plus ((rho-1)/2)*gamma*(sd+(1-sigma)*tau*phid)^2,
    with the incline potential removed (it cancels against the control) and
    the symmetry-breaking term -V_eps(y) = +(epsilon/2) y^2 added.
    """

    def __init__(self, params: ModelParameters, gains: ControllerGains):
        if gains.sigma == 0.0 or gains.rho == 0.0:
            raise DegenerateGainError("potential shaping requires sigma != 0 and rho != 0")
        self.params = params
        self.gains = gains

    def value(self, q: Vec2, v: Vec2) -> float:
        p, gn = self.params, self.gains
        f, s = q
        fd, sd = v
        t = tau(p, gn.kappa, f)
        b = p.beta(f)
        c = sd + t * fd
        w = sd + (1.0 - gn.sigma) * t * fd
        kin = 0.5 * p.alpha * fd * fd + b * fd * c + 0.5 * p.gamma * c * c
        kin += 0.5 * gn.sigma * p.gamma * (t * fd) ** 2
        kin += 0.5 * (gn.rho - 1.0) * p.gamma * w * w
        y = y_of(p, gn, ConfigurationPoint(f, s))
        return kin - v1(p, f) + 0.5 * gn.epsilon * y * y

    def grad_q(self, q: Vec2, v: Vec2) -> Vec2:
        p, gn = self.params, self.gains
        f, s = q
        fd, sd = v
        t = tau(p, gn.kappa, f)
        tp = tau_prime(p, gn.kappa, f)
        b = p.beta(f)
        bp = p.beta_prime(f)
        c = sd + t * fd
        w = sd + (1.0 - gn.sigma) * t * fd
        y = y_of(p, gn, ConfigurationPoint(f, s))
        dphi = (bp * fd * c + (b * fd + p.gamma * c) * tp * fd
                + gn.sigma * p.gamma * t * tp * fd * fd
                - v1_prime(p, f)
                + (gn.rho - 1.0) * p.gamma * w * (1.0 - gn.sigma) * tp * fd
                + gn.epsilon * y * y_phi(p, gn, f))
        return (dphi, gn.epsilon * y)

    def grad_v(self, q: Vec2, v: Vec2) -> Vec2:
        p, gn = self.params, self.gains
        f = q[0]
        fd, sd = v
        t = tau(p, gn.kappa, f)
        b = p.beta(f)
        c = sd + t * fd
        w = sd + (1.0 - gn.sigma) * t * fd
        dfd = (p.alpha * fd + b * c + b * fd * t + p.gamma * c * t
               + gn.sigma * p.gamma * t * t * fd
               + (gn.rho - 1.0) * p.gamma * w * (1.0 - gn.sigma) * t)
        dsd = b * fd + p.gamma * c + (gn.rho - 1.0) * p.gamma * w
        return (dfd, dsd)


def kinetic_controlled_ld(params: ModelParameters, gains: ControllerGains,
                          q_k: ConfigurationPoint, q_next: ConfigurationPoint) -> float:
    model = MidpointDiscreteLagrangian(
        KineticShapedLagrangian(params, replace(gains, lam=0.0)), params.h)
    return model.ld(q_k, q_next)


def alternative_controlled_ld(params: ModelParameters, gains: ControllerGains,
                              q_k: ConfigurationPoint, q_next: ConfigurationPoint) -> float:
    model = MidpointDiscreteLagrangian(KineticShapedLagrangian(params, gains), params.h)
    return model.ld(q_k, q_next)


def potential_controlled_ld(params: ModelParameters, gains: ControllerGains,
                            q_k: ConfigurationPoint, q_next: ConfigurationPoint) -> float:
    model = MidpointDiscreteLagrangian(PotentialShapedLagrangian(params, gains), params.h)
    return model.ld(q_k, q_next)


def controlled_momentum(params: ModelParameters, gains: ControllerGains,
                        q_k: ConfigurationPoint, q_next: ConfigurationPoint) -> float:
    """[(1+gamma*kappa) beta(phi_mid) Dphi + gamma Ds]/h, conserved in closed loop."""
    b = params.beta(0.5 * (q_k.phi + q_next.phi))
    return ((1.0 + params.gamma * gains.kappa) * b * (q_next.phi - q_k.phi)
            + params.gamma * (q_next.s - q_k.s)) / params.h


def kinetic_control_input(params: ModelParameters, gains: ControllerGains,
                          q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                          q_next: ConfigurationPoint) -> float:
    """u_k = -[gamma Dphi_k tau(phi_{k+1/2}) - gamma Dphi_{k-1} tau(phi_{k-1/2})]/h."""
    p = params
    t_next = tau(p, gains.kappa, 0.5 * (q_k.phi + q_next.phi))
    t_prev = tau(p, gains.kappa, 0.5 * (q_prev.phi + q_k.phi))
    return -(p.gamma * (q_next.phi - q_k.phi) * t_next
             - p.gamma * (q_k.phi - q_prev.phi) * t_prev) / p.h


def J_of(params: ModelParameters, gains: ControllerGains,
         q_k: ConfigurationPoint, q_next: ConfigurationPoint) -> float:
    """J = rho*gamma*(Ds/h - (sigma-1)*tau(phi_mid)*Dphi/h)."""
    t = tau(params, gains.kappa, 0.5 * (q_k.phi + q_next.phi))
    return gains.rho * params.gamma * ((q_next.s - q_k.s) / params.h
                                       - (gains.sigma - 1.0) * t * (q_next.phi - q_k.phi) / params.h)


def potential_control_input(params: ModelParameters, gains: ControllerGains,
                            q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                            q_next: ConfigurationPoint, v_arg: str = "y") -> float:
    """Potential-shaping control input.

    h*V2' (the incline cancellation) minus (h/2rho) times the shaped-potential
    gradient at the two interval midpoints, plus the kinetic-shaping input.
    v_arg selects the argument of V_eps': "y" (the shaped variable, achieves
    exact matching) or "s" (the raw group variable).
    """
    if gains.rho == 0.0:
        raise DegenerateGainError("rho must be nonzero for potential shaping")
    p = params
    mid_next = ConfigurationPoint(0.5 * (q_k.phi + q_next.phi), 0.5 * (q_k.s + q_next.s))
    mid_prev = ConfigurationPoint(0.5 * (q_prev.phi + q_k.phi), 0.5 * (q_prev.s + q_k.s))
    if v_arg == "y":
        a_next, a_prev = y_of(p, gains, mid_next), y_of(p, gains, mid_prev)
    elif v_arg == "s":
        a_next, a_prev = mid_next.s, mid_prev.s
    else:
        raise ValueError(f"unknown v_arg {v_arg!r}")
    grad_sum = (shaped_potential_prime(gains, a_next)
                + shaped_potential_prime(gains, a_prev))
    return (p.h * v2_prime(p) - p.h / (2.0 * gains.rho) * grad_sum
            + kinetic_control_input(p, gains, q_prev, q_k, q_next))


def w_term(params: ModelParameters, gains: ControllerGains,
           q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
           q_next: ConfigurationPoint) -> float:
    """Matching forcing of the controlled shape equation.

    (1 - sigma + sigma/rho) * [tau_+ (J_+ + (h/2)V_eps'(y_+))
                               - tau_- (J_- - (h/2)V_eps'(y_-))
                               - (1/2) tau'_+ J_+ Dphi_+ - (1/2) tau'_- J_- Dphi_-],
    subscripts +/- marking the leading/trailing interval midpoints.
    Vanishes identically when beta is constant along controlled trajectories,
    when the prefactor is zero, and at equilibrium.
    """
    p = params
    pref = 1.0 - gains.sigma + gains.sigma / gains.rho
    mid_next = ConfigurationPoint(0.5 * (q_k.phi + q_next.phi), 0.5 * (q_k.s + q_next.s))
    mid_prev = ConfigurationPoint(0.5 * (q_prev.phi + q_k.phi), 0.5 * (q_prev.s + q_k.s))
    t_next = tau(p, gains.kappa, mid_next.phi)
    t_prev = tau(p, gains.kappa, mid_prev.phi)
    tp_next = tau_prime(p, gains.kappa, mid_next.phi)
    tp_prev = tau_prime(p, gains.kappa, mid_prev.phi)
    J_next = J_of(p, gains, q_k, q_next)
    J_prev = J_of(p, gains, q_prev, q_k)
    g_next = shaped_potential_prime(gains, y_of(p, gains, mid_next))
    g_prev = shaped_potential_prime(gains, y_of(p, gains, mid_prev))
    dphi_next = q_next.phi - q_k.phi
    dphi_prev = q_k.phi - q_prev.phi
    return pref * (t_next * (J_next + 0.5 * p.h * g_next)
                   - t_prev * (J_prev - 0.5 * p.h * g_prev)
                   - 0.5 * tp_next * J_next * dphi_next
                   - 0.5 * tp_prev * J_prev * dphi_prev)


def kinetic_dissipation_term(q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                             q_next: ConfigurationPoint, D: float, h: float) -> float:
    return D * ((q_k.phi - q_prev.phi) + (q_next.phi - q_k.phi)) / (2.0 * h)


def potential_dissipation_term(params: ModelParameters, gains: ControllerGains,
                               q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                               q_next: ConfigurationPoint) -> float:
    dy_prev = y_of(params, gains, q_k) - y_of(params, gains, q_prev)
    dy_next = y_of(params, gains, q_next) - y_of(params, gains, q_k)
    return gains.D * (dy_prev + dy_next) / (2.0 * params.h)


# ---------------------------------------------------------------------------
# continuous reference laws (h -> 0 limits of the discrete inputs; also used
# by the digital controller as the held-force evaluator)

def continuous_kinetic_control(params: ModelParameters, gains: ControllerGains,
                               q: Vec2, v: Vec2) -> float:
    """u = -gamma*kappa*(beta' phid^2 + beta phidd) along the closed loop."""
    p = params
    f, fd = q[0], v[0]
    b = p.beta(f)
    bp = p.beta_prime(f)
    k = gains.kappa
    # accelerations of the kinetic-shaped closed loop
    a11, a12 = p.alpha, b
    a21, a22 = b * (1.0 + p.gamma * k), p.gamma
    r1 = -v1_prime(p, f)
    r2 = -(1.0 + p.gamma * k) * bp * fd * fd - v2_prime(p)
    det = a11 * a22 - a12 * a21
    fdd = (a22 * r1 - a12 * r2) / det
    return -p.gamma * k * (bp * fd * fd + b * fdd)


def continuous_potential_control(params: ModelParameters, gains: ControllerGains,
                                 q: Vec2, v: Vec2) -> float:
    """Force reproducing the potential-shaped dynamics on the plain plant."""
    p, gn = params, gains
    f, s = q
    fd, sd = v
    b = p.beta(f)
    bp = p.beta_prime(f)
    t = tau(p, gn.kappa, f)
    tp = tau_prime(p, gn.kappa, f)
    k1 = 1.0 + gn.sigma + (gn.rho - 1.0) * (1.0 - gn.sigma) ** 2
    k2 = 1.0 + (gn.rho - 1.0) * (1.0 - gn.sigma)
    m11 = p.alpha + 2.0 * b * t + p.gamma * t * t * k1
    m12 = b + p.gamma * t * k2
    m22 = gn.rho * p.gamma
    m11p = 4.0 * t * bp + 2.0 * k1 * p.gamma * t * tp
    m12p = bp * (1.0 + p.gamma * gn.kappa * k2)
    y = y_of(p, gn, ConfigurationPoint(f, s))
    r1 = -0.5 * m11p * fd * fd - v1_prime(p, f) + gn.epsilon * y * y_phi(p, gn, f)
    r2 = -m12p * fd * fd + gn.epsilon * y
    det = m11 * m22 - m12 * m12
    fdd = (m22 * r1 - m12 * r2) / det
    sdd = (m11 * r2 - m12 * r1) / det
    return b * fdd + bp * fd * fd + p.gamma * sdd + v2_prime(p)


def y_rate(params: ModelParameters, gains: ControllerGains, q: Vec2, v: Vec2) -> float:
    """d/dt of the shaped variable: sd + y_phi(phi)*phid."""
    return v[1] + y_phi(params, gains, q[0]) * v[0]


# ---------------------------------------------------------------------------
# closed-loop assembly

_MODES = ("kinetic", "kinetic+diss", "potential", "potential+diss")


class ClosedLoopForce:
    """Triple-aware control force for the forced DEL.

    residual_term returns the full covector added to the DEL residual; the
    control input acts on the s slot only. boundary_term supplies the
    initialization half-impulse from the continuous law.
    """

    def __init__(self, params: ModelParameters, gains: ControllerGains,
                 mode: str, v_arg: str = "y"):
        self.params = params
        self.gains = gains
        self.mode = mode
        self.v_arg = v_arg
        self._kinetic = mode.startswith("kinetic")
        self._damped = mode.endswith("+diss")

    def control(self, q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                q_next: ConfigurationPoint) -> float:
        gn = self.gains
        if self._kinetic:
            u = kinetic_control_input(self.params, gn, q_prev, q_k, q_next)
            if self._damped:
                u -= kinetic_dissipation_term(q_prev, q_k, q_next, gn.D, self.params.h)
        else:
            u = potential_control_input(self.params, gn, q_prev, q_k, q_next, self.v_arg)
            if self._damped:
                u -= potential_dissipation_term(self.params, gn, q_prev, q_k, q_next)
        return u

    def residual_term(self, q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                      q_next: ConfigurationPoint) -> Vec2:
        return (0.0, self.control(q_prev, q_k, q_next))

    def momentum(self, q_k: ConfigurationPoint, q_next: ConfigurationPoint) -> float:
        return controlled_momentum(self.params, self.gains, q_k, q_next)

    def continuous_law(self, q: Vec2, v: Vec2) -> float:
        gn = self.gains
        if self._kinetic:
            u = continuous_kinetic_control(self.params, gn, q, v)
            if self._damped:
                u -= (gn.D / self.params.h) * v[0]
        else:
            u = continuous_potential_control(self.params, gn, q, v)
            if self._damped:
                u -= (gn.D / self.params.h) * y_rate(self.params, gn, q, v)
        return u

    def boundary_term(self, q0: ConfigurationPoint, q1: ConfigurationPoint) -> Vec2:
        mid = ((q0.phi + q1.phi) / 2.0, (q0.s + q1.s) / 2.0)
        vel = ((q1.phi - q0.phi) / self.params.h, (q1.s - q0.s) / self.params.h)
        return (0.0, 0.5 * self.params.h * self.continuous_law(mid, vel))


def assemble_closed_loop(params: ModelParameters, gains: ControllerGains,
                         mode: str, v_arg: str = "y") -> ClosedLoopForce:
    """Bind the control input for `mode` into a triple-aware DEL force.

    Matching consistency is enforced: sigma must equal -1/(gamma*kappa)
    whenever kappa is nonzero, and potential modes need nonzero rho.
    """
    if mode not in _MODES:
        raise ConfigurationError(f"unknown closed-loop mode {mode!r}")
    if gains.kappa != 0.0:
        sigma_star = -1.0 / (params.gamma * gains.kappa)
        if abs(gains.sigma - sigma_star) > 1e-12 * max(1.0, abs(sigma_star)):
            raise ConfigurationError(
                f"sigma={gains.sigma!r} breaks kinetic matching; "
                f"expected -1/(gamma*kappa)={sigma_star!r}")
    elif mode.startswith("potential"):
        raise ConfigurationError("potential shaping requires kappa != 0")
    if mode.startswith("potential") and gains.rho == 0.0:
        raise ConfigurationError("potential shaping requires rho != 0")
    return ClosedLoopForce(params, gains, mode, v_arg)


class MatchingForce:
    """Forcing (w_k, 0) applied to the controlled-Lagrangian shape equation."""

    def __init__(self, params: ModelParameters, gains: ControllerGains):
        self.params = params
        self.gains = gains

    def residual_term(self, q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                      q_next: ConfigurationPoint) -> Vec2:
        return (w_term(self.params, self.gains, q_prev, q_k, q_next), 0.0)

    def control(self, q_prev: ConfigurationPoint, q_k: ConfigurationPoint,
                q_next: ConfigurationPoint) -> float:
        return w_term(self.params, self.gains, q_prev, q_k, q_next)
