"""Power-system case files, two-axis generator model and DAE linearization."""

from .case import CASE_SCHEMA, CaseDefinition, load_case, parse_case
from .model import (
    CaseModel,
    LinearizedModel,
    build_candidates,
    build_model,
    discretize,
    initialize_generators,
    linearize,
    residuals,
)
from .network import build_admittance, build_admittance_complex

__all__ = [
    "CASE_SCHEMA", "CaseDefinition", "CaseModel", "LinearizedModel", "build_admittance",
    "build_admittance_complex", "build_candidates", "build_model", "discretize",
    "initialize_generators", "linearize", "load_case", "parse_case", "residuals",
]
