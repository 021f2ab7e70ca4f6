"""Stationary Move-to-Front search cost under random (subordinator) popularity weights."""

from .analytic import MomentRequest, MomentValue, limit_moment, psi_l_closed
from .quad import QuadSpec, QuadratureError
from .sim import SamplingError, SimConfig, simulate_finite_n, simulate_limit
from .subordinator import (
    DomainError,
    GammaExponent,
    GenGammaExponent,
    PitmanYorMixture,
    StableExponent,
    model_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "GammaExponent",
    "GenGammaExponent",
    "MomentRequest",
    "MomentValue",
    "PitmanYorMixture",
    "QuadSpec",
    "QuadratureError",
    "SamplingError",
    "SimConfig",
    "StableExponent",
    "limit_moment",
    "model_from_dict",
    "psi_l_closed",
    "simulate_finite_n",
    "simulate_limit",
]
