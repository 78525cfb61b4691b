"""Budgeted placement problem, solution record and the shared objective evaluator."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..descriptor import SensorSelection, candidate_informations
from ..errors import ModelError, NotDetectable, NumericalError, PlacementError
from ..riccati import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_steady_state


class InfeasibleProblem(PlacementError):
    """Even the full candidate set does not yield a convergent filter."""


class Method(str, enum.Enum):
    BRANCH_AND_BOUND = "bnb"
    GREEDY_BEST_IN = "greedy-in"
    GREEDY_WORST_OUT = "greedy-out"
    EXHAUSTIVE = "exhaustive"


@dataclass
class Certificate:
    lower_bound: float
    gap: float
    nodes_explored: int


@dataclass
class PlacementSolution:
    gamma: SensorSelection
    objective: float
    method: Method
    certificate: Certificate | None = None
    wall_time: float = 0.0
    flags: tuple = ()
    evaluations: int = 0
    history: list = field(default_factory=list)

    @property
    def indices(self) -> tuple:
        return self.gamma.indices

    def selected_ids(self, candidates) -> list:
        return sorted(candidates[i].id for i in self.indices)


class Evaluator:
    """Computes ``tr P_inf`` for candidate subsets (cached) and for weighted mixes.

    Non-detectable or non-convergent configurations evaluate to ``inf``.
    ``workers > 1`` evaluates batches on a thread pool; results are always
    returned in input order.
    """

    def __init__(self, sys, candidates, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                 riccati_method="newton", workers=1):
        self.sys = sys
        self.candidates = list(candidates)
        self.infos = candidate_informations(self.candidates)
        self.tol = tol
        self.max_iter = max_iter
        self.riccati_method = riccati_method
        self.workers = max(1, int(workers))
        self._cache = {}
        self.solves = 0

    @property
    def M(self) -> int:
        return len(self.candidates)

    def precision(self, weights) -> np.ndarray:
        S = np.zeros((self.sys.n, self.sys.n))
        for w, info in zip(weights, self.infos):
            if w:
                S += w * info
        return S

    def _solve(self, S, P0=None):
        self.solves += 1
        try:
            res = solve_steady_state(self.sys, S, self.tol, self.max_iter,
                                     method=self.riccati_method, P0=P0)
        except NotDetectable:
            return None
        except NumericalError:
            return None
        return res if res.converged else None

    def result(self, indices):
        key = tuple(sorted(indices))
        if key not in self._cache:
            gamma = np.zeros(self.M)
            gamma[list(key)] = 1.0
            self._cache[key] = self._solve(self.precision(gamma))
        return self._cache[key]

    def is_cached(self, indices) -> bool:
        return tuple(sorted(indices)) in self._cache

    def trace(self, indices) -> float:
        res = self.result(indices)
        return res.trace if res is not None else math.inf

    def traces(self, subsets) -> list:
        subsets = [tuple(sorted(s)) for s in subsets]
        todo = [s for s in dict.fromkeys(subsets) if s not in self._cache]
        if self.workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                for key, res in zip(todo, pool.map(self._solve_key, todo)):
                    self._cache[key] = res
        return [self.trace(s) for s in subsets]

    def _solve_key(self, key):
        gamma = np.zeros(self.M)
        gamma[list(key)] = 1.0
        return self._solve(self.precision(gamma))

    def weighted(self, weights, P0=None):
        """``(trace, P)`` for fractional weights; ``(inf, None)`` if not detectable."""
        res = self._solve(self.precision(weights), P0=P0)
        if res is None:
            return math.inf, None
        return res.trace, res.P_inf

    def gradient(self, weights, P) -> np.ndarray:
        """Derivative of ``tr P_inf`` with respect to every candidate weight."""
        from ..riccati import trace_gradient

        return trace_gradient(self.sys, self.precision(weights), P, self.infos)


def exact(value) -> Fraction:
    """Rational value of a cost or budget, read as its shortest decimal form (0.1 is 1/10)."""
    return Fraction(repr(float(value)))


def exact_costs(candidates) -> list:
    return [exact(c.cost) for c in candidates]


@dataclass
class PlacementProblem:
    """Minimize ``tr P_inf(gamma)`` subject to ``c^T gamma <= budget``."""

    sys: object
    candidates: list
    budget: float
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    riccati_method: str = "newton"
    workers: int = 1
    check_full_set: bool = True

    def __post_init__(self):
        if not self.budget >= 0:
            raise ModelError("budget must be nonnegative")
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ModelError("candidate ids must be unique")
        self.candidates = list(self.candidates)
        self.costs = exact_costs(self.candidates)
        self.budget_exact = exact(self.budget)
        self.evaluator = Evaluator(self.sys, self.candidates, tol=self.tol, max_iter=self.max_iter,
                                   riccati_method=self.riccati_method, workers=self.workers)
        if self.check_full_set and not math.isfinite(self.evaluator.trace(range(self.M))):
            raise InfeasibleProblem("the full candidate set does not give a convergent steady state")

    @property
    def M(self) -> int:
        return len(self.candidates)

    def cost(self, indices) -> Fraction:
        return sum((self.costs[i] for i in indices), Fraction(0))

    def affordable(self, indices) -> bool:
        return self.cost(indices) <= self.budget_exact

    def objective(self, indices) -> float:
        return self.evaluator.trace(indices)

    def selection(self, indices) -> SensorSelection:
        return SensorSelection.from_indices(indices, self.M)
