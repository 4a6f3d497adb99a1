"""Generic discrete-mechanics engine.

Discrete and forced discrete Euler-Lagrange residuals, the implicit
one-step update solved by damped Newton iteration, and velocity-based
initialization. Everything here is model-agnostic: concrete systems
plug in through the ``DiscreteLagrangianModel`` and force protocols.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

Vec2 = tuple[float, float]


class SolverFailure(RuntimeError):
    """Newton iteration did not meet the residual tolerance."""

    def __init__(self, message: str, residual_norm: float, step_index: int | None = None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.step_index = step_index


@dataclass(frozen=True)
class ConfigurationPoint:
    """One configuration q = (phi, s): pendulum angle and cart position.

    The angle is stored unwrapped (no modular reduction) so that the
    difference phi_{k+1} - phi_k is always meaningful.
    """

    phi: float
    s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.phi) and math.isfinite(self.s)):
            raise ValueError("configuration must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.s], dtype=float)

    @staticmethod
    def from_array(a: Sequence[float]) -> "ConfigurationPoint":
        return ConfigurationPoint(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class DiscreteState:
    """Discrete phase point: the consecutive pair (q_{k-1}, q_k)."""

    q_prev: ConfigurationPoint
    q_curr: ConfigurationPoint
    k: int = 1


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_iter: int = 50
    fd_step: float = 1e-7

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.max_iter < 1 or self.fd_step <= 0:
            raise ValueError("invalid solver settings")


@runtime_checkable
class ContinuousLagrangian(Protocol):
    """Scalar L(q, v) with analytic gradients in q and v."""

    def value(self, q: Vec2, v: Vec2) -> float: ...

    def grad_q(self, q: Vec2, v: Vec2) -> Vec2: ...

    def grad_v(self, q: Vec2, v: Vec2) -> Vec2: ...


class MidpointDiscreteLagrangian:
    """Second-order discrete Lagrangian L^d(qa, qb) = h L(midpoint, difference / h).

    Partial derivatives follow from the chain rule of the midpoint rule:
    D1 = (h/2) grad_q - grad_v and D2 = (h/2) grad_q + grad_v, both
    evaluated at (midpoint, difference / h).
    """

    def __init__(self, lagrangian: ContinuousLagrangian, h: float):
        if h <= 0:
            raise ValueError("h must be positive")
        self.lagrangian = lagrangian
        self.h = h

    def _mid_vel(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> tuple[Vec2, Vec2]:
        h = self.h
        mid = (0.5 * (qa.phi + qb.phi), 0.5 * (qa.s + qb.s))
        vel = ((qb.phi - qa.phi) / h, (qb.s - qa.s) / h)
        return mid, vel

    def ld(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> float:
        mid, vel = self._mid_vel(qa, qb)
        return self.h * self.lagrangian.value(mid, vel)

    def d1(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> np.ndarray:
        mid, vel = self._mid_vel(qa, qb)
        gq = self.lagrangian.grad_q(mid, vel)
        gv = self.lagrangian.grad_v(mid, vel)
        return np.array([0.5 * self.h * gq[0] - gv[0], 0.5 * self.h * gq[1] - gv[1]])

    def d2(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> np.ndarray:
        mid, vel = self._mid_vel(qa, qb)
        gq = self.lagrangian.grad_q(mid, vel)
        gv = self.lagrangian.grad_v(mid, vel)
        return np.array([0.5 * self.h * gq[0] + gv[0], 0.5 * self.h * gq[1] + gv[1]])

    def legendre(self, q: ConfigurationPoint, v: Vec2) -> np.ndarray:
        """Continuous momentum dL/dv at (q, v), used by initialization."""
        return np.asarray(self.lagrangian.grad_v((q.phi, q.s), v), dtype=float)


@runtime_checkable
class DiscreteForce(Protocol):
    """Pairwise discrete force maps F1(qa, qb), F2(qa, qb) -> covector."""

    def f1(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> np.ndarray: ...

    def f2(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> np.ndarray: ...


@runtime_checkable
class TripleForce(Protocol):
    """Force whose value at index k needs the whole triple (q_{k-1}, q_k, q_{k+1})."""

    def residual_term(
        self,
        q_prev: ConfigurationPoint,
        q_curr: ConfigurationPoint,
        q_next: ConfigurationPoint,
    ) -> np.ndarray: ...


class ZeroForce:
    def f1(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> np.ndarray:
        return np.zeros(2)

    def f2(self, qa: ConfigurationPoint, qb: ConfigurationPoint) -> np.ndarray:
        return np.zeros(2)

    def residual_term(self, q_prev, q_curr, q_next) -> np.ndarray:
        return np.zeros(2)


@dataclass
class Trajectory:
    """Simulation output: configurations plus per-step records.

    ``us[k]`` is the control applied at interior index k (None when the
    force exposes no control), ``p[k]`` and ``E[k]`` are the momentum and
    discrete energy of the pair (q_k, q_{k+1}) when the model exposes them.
    """

    points: list[ConfigurationPoint]
    us: list[float | None] = field(default_factory=list)
    p: list[float | None] = field(default_factory=list)
    E: list[float | None] = field(default_factory=list)
    h: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    def phi(self) -> np.ndarray:
        return np.array([q.phi for q in self.points])

    def s(self) -> np.ndarray:
        return np.array([q.s for q in self.points])


def discrete_action(model, path: Sequence[ConfigurationPoint]) -> float:
    """Action sum of a discrete path: sum of L^d over consecutive pairs."""
    if len(path) < 2:
        raise ValueError("path must contain at least 2 points")
    return sum(model.ld(path[k], path[k + 1]) for k in range(len(path) - 1))


def del_residual(model, q_prev, q_curr, q_next) -> np.ndarray:
    """Unforced discrete Euler-Lagrange residual at the interior point q_curr."""
    return model.d1(q_curr, q_next) + model.d2(q_prev, q_curr)


def _force_term(force, q_prev, q_curr, q_next) -> np.ndarray:
    if force is None:
        return np.zeros(2)
    if hasattr(force, "residual_term"):
        return np.asarray(force.residual_term(q_prev, q_curr, q_next), dtype=float)
    return np.asarray(force.f1(q_curr, q_next), dtype=float) + np.asarray(
        force.f2(q_prev, q_curr), dtype=float
    )


def forced_del_residual(model, force, q_prev, q_curr, q_next) -> np.ndarray:
    """Forced discrete Euler-Lagrange residual: DEL terms plus discrete forces."""
    return del_residual(model, q_prev, q_curr, q_next) + _force_term(
        force, q_prev, q_curr, q_next
    )


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    guess: Sequence[float],
    settings: SolverSettings = SolverSettings(),
) -> np.ndarray:
    """Damped Newton iteration with a finite-difference Jacobian.

    Deterministic for fixed inputs. The step is halved (up to 30 times)
    whenever the residual norm fails to decrease.
    """
    x = np.array(guess, dtype=float)
    r = np.asarray(residual(x), dtype=float)
    nr = float(np.max(np.abs(r)))
    n = x.size
    for _ in range(settings.max_iter):
        if nr <= settings.tol:
            return x
        jac = np.empty((n, n))
        for j in range(n):
            d = settings.fd_step * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += d
            jac[:, j] = (np.asarray(residual(xp), dtype=float) - r) / d
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure(f"singular Jacobian: {exc}", nr) from exc
        if not np.all(np.isfinite(dx)):
            raise SolverFailure("non-finite Newton step", nr)
        lam = 1.0
        for _ in range(30):
            x_try = x + lam * dx
            r_try = np.asarray(residual(x_try), dtype=float)
            nr_try = float(np.max(np.abs(r_try)))
            if nr_try < nr or nr_try <= settings.tol:
                x, r, nr = x_try, r_try, nr_try
                break
            lam *= 0.5
        else:
            raise SolverFailure(f"Newton stalled at residual {nr:.3e}", nr)
    if nr <= settings.tol:
        return x
    raise SolverFailure(f"Newton did not converge: residual {nr:.3e}", nr)


def step(
    model,
    force,
    state: DiscreteState,
    settings: SolverSettings = SolverSettings(),
) -> ConfigurationPoint:
    """One implicit update: solve the forced DEL for q_{k+1}.

    Initial guess is the linear extrapolation 2 q_curr - q_prev.
    """
    qp, qc = state.q_prev, state.q_curr

    def resid(x: np.ndarray) -> np.ndarray:
        return forced_del_residual(model, force, qp, qc, ConfigurationPoint(x[0], x[1]))

    guess = np.array([2.0 * qc.phi - qp.phi, 2.0 * qc.s - qp.s])
    try:
        x = newton_solve(resid, guess, settings)
    except SolverFailure as exc:
        exc.step_index = state.k
        raise
    return ConfigurationPoint(float(x[0]), float(x[1]))


def initialize_from_state(
    model,
    force,
    q0: ConfigurationPoint,
    v0: Vec2,
    settings: SolverSettings = SolverSettings(),
) -> ConfigurationPoint:
    """Solve the velocity boundary condition for q1.

    Root of dL/dv(q0, v0) + D1 L^d(q0, q1) + F1(q0, q1) = 0, seeded with
    the Euler prediction q1 = q0 + h v0. Triple-aware forces contribute
    through their first-slot half-impulse at the boundary.
    """
    p0 = model.legendre(q0, v0)

    def resid(x: np.ndarray) -> np.ndarray:
        q1 = ConfigurationPoint(x[0], x[1])
        r = p0 + model.d1(q0, q1)
        if force is None:
            return r
        if hasattr(force, "boundary_term"):
            return r + np.asarray(force.boundary_term(q0, q1), dtype=float)
        return r + np.asarray(force.f1(q0, q1), dtype=float)

    guess = np.array([q0.phi + model.h * v0[0], q0.s + model.h * v0[1]])
    x = newton_solve(resid, guess, settings)
    return ConfigurationPoint(float(x[0]), float(x[1]))


def simulate(
    model,
    force,
    q0: ConfigurationPoint,
    q1: ConfigurationPoint,
    n_steps: int,
    settings: SolverSettings = SolverSettings(),
) -> Trajectory:
    """March the implicit update map N times from the pair (q0, q1).

    Records per-step control, momentum, and discrete energy when the
    force/model expose ``control``, ``momentum`` and ``energy`` hooks.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    pts = [q0, q1]
    traj = Trajectory(points=pts, h=model.h)
    has_u = force is not None and hasattr(force, "control")
    has_p = hasattr(model, "momentum") or (force is not None and hasattr(force, "momentum"))
    has_e = hasattr(model, "energy")
    mom = getattr(force, "momentum", None) or getattr(model, "momentum", None)
    for k in range(1, n_steps):
        qn = step(model, force, DiscreteState(pts[k - 1], pts[k], k), settings)
        pts.append(qn)
        traj.us.append(float(force.control(pts[k - 1], pts[k], qn)) if has_u else None)
        traj.p.append(float(mom(pts[k - 1], pts[k])) if has_p else None)
        traj.E.append(float(model.energy(pts[k - 1], pts[k])) if has_e else None)
    if has_p:
        traj.p.append(float(mom(pts[-2], pts[-1])))
    if has_e:
        traj.E.append(float(model.energy(pts[-2], pts[-1])))
    return traj
