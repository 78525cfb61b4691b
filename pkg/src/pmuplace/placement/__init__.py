"""Budgeted PMU selection: exact and greedy solvers plus optimality checks."""

from .bnb import NodeRecord, branch_and_bound
from .exhaustive import exhaustive
from .greedy import greedy_best_in, greedy_worst_out
from .problem import (
    Certificate,
    Evaluator,
    InfeasibleProblem,
    Method,
    PlacementProblem,
    PlacementSolution,
)
from .certificate import CertificateReport, verify_certificate
from .submodularity import SubmodularityWitness, non_submodularity_witness

__all__ = [
    "Certificate",
    "CertificateReport",
    "Evaluator",
    "InfeasibleProblem",
    "Method",
    "NodeRecord",
    "PlacementProblem",
    "PlacementSolution",
    "SubmodularityWitness",
    "branch_and_bound",
    "exhaustive",
    "greedy_best_in",
    "greedy_worst_out",
    "non_submodularity_witness",
    "verify_certificate",
]
