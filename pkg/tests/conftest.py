"""Shared fixtures: the benchmark cart-pendulum parameter sets and gain records."""
import math

import pytest

from delshape import ModelParameters
from delshape.shaping import matched_gains
from delshape.stability import kinetic_spectral_condition


@pytest.fixture(scope="session")
def p_flat() -> ModelParameters:
    """Level-plane benchmark: m=0.14, M=0.44, l=0.215, h=0.05, psi=0."""
    return ModelParameters(m=0.14, M=0.44, l=0.215, psi=0.0, g=9.81, h=0.05)


@pytest.fixture(scope="session")
def p_incline() -> ModelParameters:
    """Same masses on the 20-degree (pi/9) incline."""
    return ModelParameters(m=0.14, M=0.44, l=0.215, psi=math.pi / 9, g=9.81, h=0.05)


@pytest.fixture(scope="session")
def kappa_crit(p_flat: ModelParameters) -> float:
    return kinetic_spectral_condition(p_flat).kappa_crit


@pytest.fixture(scope="session")
def kappa2(kappa_crit: float) -> float:
    """Twice the critical kinetic gain, the benchmark operating point."""
    return 2.0 * kappa_crit


@pytest.fixture(scope="session")
def gains_kinetic(p_flat, kappa2):
    return matched_gains(p_flat, kappa=kappa2)


@pytest.fixture(scope="session")
def gains_potential(p_incline):
    """Benchmark potential-shaping gains: kappa=20, rho=-0.02, epsilon=1e-5."""
    return matched_gains(p_incline, kappa=20.0, rho=-0.02, epsilon=1e-5)
