"""Cart-pendulum on an incline: coefficients, potentials, Lagrangians.

Sign convention: the pendulum is inverted, so the upright equilibrium
phi = 0 sits at the maximum of the pendulum potential (V1''(0) < 0).
The cart potential tilts downhill along the incline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationPoint, MidpointDiscreteLagrangian, Vec2


@dataclass(frozen=True)
class ModelParameters:
    """Masses, geometry, gravity, and the sampling step h."""

    m: float
    M: float
    l: float
    psi: float = 0.0
    g: float = 9.81
    h: float = 0.05

    def __post_init__(self) -> None:
        if min(self.m, self.M, self.l, self.g, self.h) <= 0:
            raise ValueError("m, M, l, g, h must be positive")
        if abs(self.psi) >= math.pi / 2:
            raise ValueError("incline angle must satisfy |psi| < pi/2")

    @property
    def alpha(self) -> float:
        return self.m * self.l * self.l

    @property
    def gamma(self) -> float:
        return self.M + self.m

    @property
    def ml(self) -> float:
        return self.m * self.l

    def beta(self, phi: float) -> float:
        return self.ml * math.cos(phi - self.psi)

    def beta_prime(self, phi: float) -> float:
        return -self.ml * math.sin(phi - self.psi)

    def beta_integral(self, phi: float) -> float:
        """Antiderivative of beta with beta_integral(0) = 0."""
        return self.ml * (math.sin(phi - self.psi) + math.sin(self.psi))


@dataclass(frozen=True)
class KineticCoefficients:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("alpha and gamma must be positive")
        if self.alpha * self.gamma - self.beta**2 <= 0:
            raise ValueError("kinetic metric must be positive definite")


def metric_coeffs(params: ModelParameters, phi: float) -> KineticCoefficients:
    """Kinetic-energy coefficients (alpha, beta(phi), gamma)."""
    return KineticCoefficients(params.alpha, params.beta(phi), params.gamma)


def v1(params: ModelParameters, phi: float) -> float:
    """Pendulum potential; maximum at the upright equilibrium phi = 0."""
    return params.m * params.g * params.l * math.cos(phi)


def v1_prime(params: ModelParameters, phi: float) -> float:
    return -params.m * params.g * params.l * math.sin(phi)


def v1_second(params: ModelParameters, phi: float) -> float:
    return -params.m * params.g * params.l * math.cos(phi)


def v2(params: ModelParameters, s: float) -> float:
    """Incline potential of the total mass travelling along the slope."""
    return -params.gamma * params.g * s * math.sin(params.psi)


def v2_prime(params: ModelParameters) -> float:
    return -params.gamma * params.g * math.sin(params.psi)


def potential(params: ModelParameters, q: ConfigurationPoint) -> float:
    return v1(params, q.phi) + v2(params, q.s)


class PlainLagrangian:
    """L(q, v) = kinetic quadratic form minus V1(phi) + V2(s)."""

    def __init__(self, params: ModelParameters):
        self.params = params

    def value(self, q: Vec2, v: Vec2) -> float:
        p = self.params
        b = p.beta(q[0])
        kin = 0.5 * (p.alpha * v[0] ** 2 + 2.0 * b * v[0] * v[1] + p.gamma * v[1] ** 2)
        return kin - v1(p, q[0]) - v2(p, q[1])

    def grad_q(self, q: Vec2, v: Vec2) -> Vec2:
        p = self.params
        return (
            p.beta_prime(q[0]) * v[0] * v[1] - v1_prime(p, q[0]),
            -v2_prime(p),
        )

    def grad_v(self, q: Vec2, v: Vec2) -> Vec2:
        p = self.params
        b = p.beta(q[0])
        return (p.alpha * v[0] + b * v[1], b * v[0] + p.gamma * v[1])


def continuous_lagrangian(params: ModelParameters, q: ConfigurationPoint, v: Vec2) -> float:
    return PlainLagrangian(params).value((q.phi, q.s), v)


class CartPendulumModel(MidpointDiscreteLagrangian):
    """Midpoint discrete Lagrangian of the plain cart-pendulum.

    Exposes the plain discrete momentum [beta(mid) dphi + gamma ds] / h
    and a discrete energy built from the midpoint quadrature.
    """

    def __init__(self, params: ModelParameters):
        super().__init__(PlainLagrangian(params), params.h)
        self.params = params

    def momentum(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> float:
        p = self.params
        b = p.beta(0.5 * (qa.phi + qb.phi))
        return (b * (qb.phi - qa.phi) + p.gamma * (qb.s - qa.s)) / p.h

    def energy(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> float:
        """Midpoint discrete energy: kinetic plus potential at (mid, diff/h)."""
        p = self.params
        mid = ConfigurationPoint(0.5 * (qa.phi + qb.phi), 0.5 * (qa.s + qb.s))
        vphi = (qb.phi - qa.phi) / p.h
        vs = (qb.s - qa.s) / p.h
        b = p.beta(mid.phi)
        kin = 0.5 * (p.alpha * vphi**2 + 2.0 * b * vphi * vs + p.gamma * vs**2)
        return kin + potential(p, mid)


def discrete_lagrangian(
    params: ModelParameters, qa: ConfigurationPoint, qb: ConfigurationPoint
) -> float:
    """Midpoint discrete Lagrangian of the plain model over one step."""
    return CartPendulumModel(params).ld(qa, qb)


def accel_forced(params: ModelParameters, q: Vec2, v: Vec2, u: float) -> np.ndarray:
    """Continuous accelerations of the forced plant.

    Mass-matrix solve of the two force-balance equations; u acts on the
    cart coordinate only.
    """
    p = params
    b = p.beta(q[0])
    bp = p.beta_prime(q[0])
    det = p.alpha * p.gamma - b * b
    r1 = -v1_prime(p, q[0])
    r2 = u - v2_prime(p) - bp * v[0] ** 2
    return np.array([(p.gamma * r1 - b * r2) / det, (p.alpha * r2 - b * r1) / det])
