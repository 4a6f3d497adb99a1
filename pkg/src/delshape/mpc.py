"""Real-time digital controller with piecewise-constant forces.

The controller senses sampled positions, runs two forward solves of the
forced discrete model per cycle, and emits a force held constant over the
next sampling interval.  Discrete forces inside the prediction are the fixed
map F(qa, qb) = (0, (h/2) u(mid(qa,qb), (qb-qa)/h)) built from the continuous
feedback law u; occurrences at already-known points are constants of the
solve, the occurrence involving the unknown point is implicit.

Startup: the plant is unforced on [0, 2h] while the first two samples are
collected; the first cycle predicts two steps ahead unforced-then-forced, the
second cycle re-estimates from the fresh sample with one trailing force, and
from then on every cycle carries both trailing and leading force terms.

Dissipation signs for the held laws (measured on the sampled/hold loop):
both add +(D/h) times the predicted rate, ydot for the potential law and
phidot for the kinetic law; the variational loop uses the opposite sign.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cartpend import CartPendulumModel, ModelParameters, accel_forced, metric_coeffs, potential
from .core import ConfigurationPoint, SolverSettings, newton_solve
from .shaping import (
    ConfigurationError,
    ControllerGains,
    continuous_kinetic_control,
    continuous_potential_control,
    y_rate,
)

ControlLaw = Callable[[np.ndarray, np.ndarray], float]

MPC_MODES = ("mpc-kinetic", "mpc-potential")


class PlantSimulator:
    """Continuous cart-pendulum advanced by a classical 4-stage one-step
    method at substep h/nsub, with the force held constant per interval."""

    def __init__(self, params: ModelParameters, nsub: int = 50):
        if nsub < 1:
            raise ValueError("nsub must be >= 1")
        self.params = params
        self.nsub = nsub

    def derivative(self, z: np.ndarray, u: float) -> np.ndarray:
        acc = accel_forced(self.params, (z[0], z[1]), (z[2], z[3]), u)
        return np.array([z[2], z[3], acc[0], acc[1]])

    def hold(self, z: np.ndarray, u: float) -> np.ndarray:
        """Advance one control interval h under the held force u."""
        dt = self.params.h / self.nsub
        z = np.asarray(z, float)
        for _ in range(self.nsub):
            k1 = self.derivative(z, u)
            k2 = self.derivative(z + 0.5 * dt * k1, u)
            k3 = self.derivative(z + 0.5 * dt * k2, u)
            k4 = self.derivative(z + dt * k3, u)
            z = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return z

    def energy(self, z: np.ndarray) -> float:
        c = metric_coeffs(self.params, z[0])
        kin = 0.5 * (c.alpha * z[2] ** 2 + 2.0 * c.beta * z[2] * z[3] + c.gamma * z[3] ** 2)
        return kin + potential(self.params, ConfigurationPoint(z[0], z[1]))


def make_control_law(params: ModelParameters, gains: ControllerGains, mode: str) -> ControlLaw:
    """Continuous feedback law (force scale) used as the held-force evaluator."""
    if mode not in MPC_MODES:
        raise ConfigurationError(f"unknown digital-controller mode {mode!r}")
    if gains.kappa != 0.0:
        sigma_star = -1.0 / (params.gamma * gains.kappa)
        if abs(gains.sigma - sigma_star) > 1e-12 * max(1.0, abs(sigma_star)):
            raise ConfigurationError("sigma breaks kinetic matching for the digital controller")
    if mode == "mpc-kinetic":
        def law(q: np.ndarray, v: np.ndarray) -> float:
            u = continuous_kinetic_control(params, gains, (q[0], q[1]), (v[0], v[1]))
            return u + (gains.D / params.h) * v[0]
        return law
    if gains.rho == 0.0 or gains.sigma == 0.0:
        raise ConfigurationError("potential digital control requires nonzero sigma and rho")

    def law(q: np.ndarray, v: np.ndarray) -> float:
        u = continuous_potential_control(params, gains, (q[0], q[1]), (v[0], v[1]))
        return u + (gains.D / params.h) * y_rate(params, gains, (q[0], q[1]), (v[0], v[1]))
    return law


def held_force_control(law: ControlLaw, q_a: np.ndarray, q_b: np.ndarray, h: float) -> float:
    """Evaluate the law at midpoint position and finite-difference velocity."""
    q_a = np.asarray(q_a, float)
    q_b = np.asarray(q_b, float)
    return float(law(0.5 * (q_a + q_b), (q_b - q_a) / h))


def composition_impulse(law: ControlLaw, q_a: np.ndarray, q_b: np.ndarray, h: float) -> float:
    """s-slot impulse (h/2) u of the discrete force map at a point pair."""
    return 0.5 * h * held_force_control(law, q_a, q_b, h)


def solve_prediction(model: CartPendulumModel, law: ControlLaw | None,
                     q_prev: np.ndarray, q_k: np.ndarray, trailing_impulse: float,
                     settings: SolverSettings, implicit: bool = True) -> np.ndarray:
    """One forward solve of the forced DEL for the next position.

    trailing_impulse collects the force terms evaluated at known point pairs;
    when implicit is true the leading force term is the composition at
    (q_k, unknown) and enters the root problem.
    """
    h = model.h
    qp = ConfigurationPoint(float(q_prev[0]), float(q_prev[1]))
    qk = ConfigurationPoint(float(q_k[0]), float(q_k[1]))
    base = model.d2(qp, qk) + np.array([0.0, trailing_impulse])

    def resid(x: np.ndarray) -> np.ndarray:
        qn = ConfigurationPoint(float(x[0]), float(x[1]))
        r = base + model.d1(qk, qn)
        if implicit and law is not None:
            r = r + np.array([0.0, composition_impulse(law, q_k, x, h)])
        return r

    guess = 2.0 * np.asarray(q_k, float) - np.asarray(q_prev, float)
    return newton_solve(resid, guess, settings)


def forward_estimate(model: CartPendulumModel, law: ControlLaw,
                     q_prev: np.ndarray, q_k: np.ndarray,
                     settings: SolverSettings,
                     trailing_impulse: float | None = None,
                     first_unforced: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Two successive forward solves from a sensed pair.

    Steady phase: the first solve carries the trailing composition at the
    sensed pair (computed here when not supplied) plus the implicit leading
    term; the second solve shifts the window by one.  first_unforced selects
    the startup variant whose first solve has no force terms at all.
    """
    h = model.h
    if first_unforced:
        qa = solve_prediction(model, None, q_prev, q_k, 0.0, settings, implicit=False)
        qb = solve_prediction(model, law, q_k, qa, 0.0, settings)
        return qa, qb
    if trailing_impulse is None:
        trailing_impulse = composition_impulse(law, q_prev, q_k, h)
    qa = solve_prediction(model, law, q_prev, q_k, trailing_impulse, settings)
    qb = solve_prediction(model, law, q_prev=q_k, q_k=qa,
                          trailing_impulse=composition_impulse(law, q_k, qa, h),
                          settings=settings)
    return qa, qb


@dataclass
class MpcRun:
    """Digital-control run record: plant states at sample times, the held
    force per interval, and the wall time of the two solves per cycle."""

    h: float
    states: np.ndarray
    forces: np.ndarray
    solve_seconds: np.ndarray

    def times(self) -> np.ndarray:
        return self.h * np.arange(self.states.shape[0])


@dataclass(frozen=True)
class CycleStats:
    mean: float
    p99: float
    max: float
    h: float

    @property
    def real_time(self) -> bool:
        return self.mean < self.h


def measure_cycle_time(run: MpcRun) -> CycleStats:
    t = np.asarray(run.solve_seconds, float)
    if t.size == 0:
        return CycleStats(0.0, 0.0, 0.0, run.h)
    return CycleStats(float(np.mean(t)), float(np.percentile(t, 99)),
                      float(np.max(t)), run.h)


def run_digital_controller(
    params: ModelParameters,
    law: ControlLaw,
    z0,
    t_final: float,
    nsub: int = 50,
    settings: SolverSettings | None = None,
    sense_transform: Callable[[int, np.ndarray], np.ndarray] | None = None,
    debug_sleep: float = 0.0,
) -> MpcRun:
    """Run the sense/predict/actuate loop against the simulated plant.

    The force on [kh, (k+1)h] is computed during the preceding interval from
    samples taken at times <= (k-1)h.  debug_sleep injects an artificial
    stall into the measured cycle (instrumentation testing only).
    """
    settings = settings or SolverSettings(tol=1e-8)
    h = params.h
    n = int(round(t_final / h))
    if abs(n * h - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError("t_final must be an integer multiple of h")
    if n < 5:
        raise ValueError("need at least 5 control intervals")
    model = CartPendulumModel(params)
    plant = PlantSimulator(params, nsub)

    def sense(k: int, z: np.ndarray) -> np.ndarray:
        q = np.array(z[:2], float)
        return sense_transform(k, q) if sense_transform is not None else q

    z = np.asarray(z0, float)
    states = [z.copy()]
    sensed = [sense(0, z)]
    us = [0.0, 0.0]
    solve_t = []

    def timed(fn):
        t0 = time.perf_counter()
        out = fn()
        if debug_sleep > 0.0:
            time.sleep(debug_sleep)
        solve_t.append(time.perf_counter() - t0)
        return out

    # [0, h]: unforced; collect the second sample
    z = plant.hold(z, us[0])
    states.append(z.copy())
    sensed.append(sense(1, z))

    # cycle during [h, 2h]: predict two steps from (q0, q1), first solve
    # unforced, and hold the result on [2h, 3h]
    qa, qb = timed(lambda: forward_estimate(model, law, sensed[0], sensed[1],
                                            settings, first_unforced=True))
    us.append(held_force_control(law, qa, qb, h))

    z = plant.hold(z, us[1])
    states.append(z.copy())
    sensed.append(sense(2, z))

    # cycle during [2h, 3h]: re-estimate from the fresh sample q2 with one
    # leading force term, then the fully forced second solve
    def _second_cycle():
        q3 = solve_prediction(model, law, sensed[1], sensed[2], 0.0, settings)
        q4 = solve_prediction(model, law, sensed[2], q3,
                              composition_impulse(law, sensed[2], q3, h), settings)
        return q3, q4

    qa, qb = timed(_second_cycle)
    us.append(held_force_control(law, qa, qb, h))

    z = plant.hold(z, us[2])
    states.append(z.copy())
    sensed.append(sense(3, z))

    # steady loop: during [(k-1)h, kh] sense q_{k-1}, run the two forced
    # solves, actuate on [kh, (k+1)h]
    for k in range(4, n):
        qa, qb = timed(lambda: forward_estimate(model, law, sensed[k - 2],
                                                sensed[k - 1], settings))
        us.append(held_force_control(law, qa, qb, h))
        z = plant.hold(z, us[k - 1])
        states.append(z.copy())
        sensed.append(sense(k, z))

    # remaining intervals actuate the already-computed schedule
    for k in range(len(states) - 1, n):
        z = plant.hold(z, us[k])
        states.append(z.copy())
        sensed.append(sense(k + 1, z))

    return MpcRun(h=h, states=np.array(states), forces=np.array(us[:n]),
                  solve_seconds=np.array(solve_t))
