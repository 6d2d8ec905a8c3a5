"""Phase-space Monte Carlo for pulsed entanglement transfer into two optomechanical
oscillators, with exact Gaussian moment propagation as an independent reference."""

from .errors import (
    ConfigError,
    DegenerateCovarianceError,
    DomainError,
    InsufficientSamplesError,
    NumericalError,
    TrajectoryError,
)
from .model import (
    REFERENCE_PHYSICAL,
    PhysicalParams,
    ProtocolParams,
    PulseSchedule,
    default_schedule,
    thermal_occupation,
    to_dimensionless,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateCovarianceError",
    "DomainError",
    "InsufficientSamplesError",
    "NumericalError",
    "TrajectoryError",
    "REFERENCE_PHYSICAL",
    "PhysicalParams",
    "ProtocolParams",
    "PulseSchedule",
    "default_schedule",
    "thermal_occupation",
    "to_dimensionless",
]
