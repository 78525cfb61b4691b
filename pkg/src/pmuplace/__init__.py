"""Optimal PMU placement for Kalman filtering of descriptor power-system models."""

from .descriptor import (
    AlgebraicCoords,
    CandidateKind,
    DescriptorSystem,
    MeasurementCandidate,
    SensorSelection,
    assemble_precision,
    transform_algebraic_coordinates,
    validate_system,
)
from .errors import ModelError, NotDetectable, NumericalError, PlacementError, RefusedScale
from .riccati import SteadyStateResult, condition_number, riccati_step, solve_steady_state

__all__ = [
    "AlgebraicCoords",
    "CandidateKind",
    "DescriptorSystem",
    "MeasurementCandidate",
    "ModelError",
    "NotDetectable",
    "NumericalError",
    "PlacementError",
    "RefusedScale",
    "SensorSelection",
    "SteadyStateResult",
    "assemble_precision",
    "condition_number",
    "riccati_step",
    "solve_steady_state",
    "transform_algebraic_coordinates",
    "validate_system",
]

__version__ = "0.1.0"
