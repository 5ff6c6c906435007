"""Handover rate and sojourn time for a static user served by moving drone base stations."""

from .model import (
    CcdfCurve,
    Constant,
    Discrete,
    DirectionDistribution,
    DroneNetworkModel,
    Exponential,
    HybridTierConfig,
    RateReport,
    SimulationConfig,
    SpeedDistribution,
    SweepParams,
    TierParams,
    TwoPoint,
    UniformRange,
)
from .quadrature import NumericalFailure

__version__ = "0.1.0"

__all__ = [
    "CcdfCurve",
    "Constant",
    "Discrete",
    "DirectionDistribution",
    "DroneNetworkModel",
    "Exponential",
    "HybridTierConfig",
    "NumericalFailure",
    "RateReport",
    "SimulationConfig",
    "SpeedDistribution",
    "SweepParams",
    "TierParams",
    "TwoPoint",
    "UniformRange",
]
