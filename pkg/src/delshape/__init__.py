"""Discrete mechanics with energy-shaping control for the cart-pendulum.

Variational integrators for forced mechanical systems, kinetic and potential
shaping feedback on an inclined cart-pendulum, spectral and energy-based
stability certificates, and a sampled digital controller with
piecewise-constant forces.
"""
from .cartpend import (
    CartPendulumModel,
    KineticCoefficients,
    ModelParameters,
    PlainLagrangian,
    accel_forced,
    continuous_lagrangian,
    discrete_lagrangian,
    metric_coeffs,
    potential,
)
from .core import (
    ConfigurationPoint,
    DiscreteState,
    MidpointDiscreteLagrangian,
    SolverFailure,
    SolverSettings,
    Trajectory,
    ZeroForce,
    del_residual,
    discrete_action,
    forced_del_residual,
    initialize_from_state,
    newton_solve,
    simulate,
    step,
)
from .mpc import (
    CycleStats,
    MpcRun,
    PlantSimulator,
    forward_estimate,
    held_force_control,
    make_control_law,
    measure_cycle_time,
    run_digital_controller,
)
from .shaping import (
    ClosedLoopForce,
    ConfigurationError,
    ControllerGains,
    DegenerateGainError,
    KineticShapedLagrangian,
    MatchingForce,
    PotentialShapedLagrangian,
    assemble_closed_loop,
    alternative_matching_gains,
    continuous_kinetic_control,
    continuous_potential_control,
    controlled_momentum,
    kinetic_control_input,
    kinetic_matching_gains,
    matched_gains,
    potential_control_input,
    w_term,
)
from .stability import (
    DegenerateLinearizationError,
    KineticCondition,
    LinearUpdateMap,
    MatchingReport,
    PotentialCertificate,
    damped_kinetic_map,
    damped_linear_map,
    energy_balance_check,
    iterate_map,
    kinetic_spectral_condition,
    linearized_kinetic_map,
    linearized_potential_map,
    potential_spectral_condition,
    verify_matching_equivalence,
)

__version__ = "0.1.0"

__all__ = [
    "CartPendulumModel",
    "ClosedLoopForce",
    "ConfigurationError",
    "ConfigurationPoint",
    "ControllerGains",
    "CycleStats",
    "DegenerateGainError",
    "DegenerateLinearizationError",
    "DiscreteState",
    "KineticCoefficients",
    "KineticCondition",
    "KineticShapedLagrangian",
    "LinearUpdateMap",
    "MatchingForce",
    "MatchingReport",
    "MidpointDiscreteLagrangian",
    "ModelParameters",
    "MpcRun",
    "PlainLagrangian",
    "PlantSimulator",
    "PotentialCertificate",
    "PotentialShapedLagrangian",
    "SolverFailure",
    "SolverSettings",
    "Trajectory",
    "ZeroForce",
    "accel_forced",
    "alternative_matching_gains",
    "assemble_closed_loop",
    "continuous_kinetic_control",
    "continuous_lagrangian",
    "continuous_potential_control",
    "controlled_momentum",
    "damped_kinetic_map",
    "damped_linear_map",
    "del_residual",
    "discrete_action",
    "discrete_lagrangian",
    "energy_balance_check",
    "forced_del_residual",
    "forward_estimate",
    "held_force_control",
    "initialize_from_state",
    "iterate_map",
    "kinetic_control_input",
    "kinetic_matching_gains",
    "kinetic_spectral_condition",
    "linearized_kinetic_map",
    "linearized_potential_map",
    "make_control_law",
    "matched_gains",
    "measure_cycle_time",
    "metric_coeffs",
    "newton_solve",
    "potential",
    "potential_control_input",
    "potential_spectral_condition",
    "run_digital_controller",
    "simulate",
    "step",
    "verify_matching_equivalence",
    "w_term",
]
