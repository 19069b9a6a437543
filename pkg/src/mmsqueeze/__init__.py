"""Simulation and analysis toolkit for spectrally multimode, pulse-resolved squeezed light."""

from .errors import (
    ConfigurationError,
    DomainError,
    IncompleteDatasetError,
    InfeasibleTargetError,
    InvalidParameterError,
    InvalidProjectionError,
    NumericalError,
    SqueezeError,
)
from .gauss import GaussianState, apply_loss, check_physicality, make_squeezed_vacuum

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "GaussianState",
    "IncompleteDatasetError",
    "InfeasibleTargetError",
    "InvalidParameterError",
    "InvalidProjectionError",
    "NumericalError",
    "SqueezeError",
    "apply_loss",
    "check_physicality",
    "make_squeezed_vacuum",
]
