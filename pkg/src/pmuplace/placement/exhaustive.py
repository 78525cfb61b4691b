"""Brute-force enumeration, used as the certification oracle."""

from __future__ import annotations

import itertools
import math
import time

from ..errors import RefusedScale
from .problem import Certificate, InfeasibleProblem, Method, PlacementSolution

MAX_CANDIDATES = 25


def feasible_subsets(prob):
    """Every affordable subset, as sorted index tuples."""
    for k in range(prob.M + 1):
        any_fit = False
        for combo in itertools.combinations(range(prob.M), k):
            if prob.affordable(combo):
                any_fit = True
                yield combo
        if not any_fit and all(c > 0 for c in prob.costs):
            # with positive costs no larger subset can fit either
            return


def gamma_key(indices, M) -> tuple:
    chosen = set(indices)
    return tuple(int(i in chosen) for i in range(M))


def exhaustive(prob, max_candidates=MAX_CANDIDATES) -> PlacementSolution:
    """Evaluate every feasible selection and return the global minimizer.

    Ties go to the lexicographically smallest selection vector.  Raises
    :class:`InfeasibleProblem` when no affordable selection converges.
    """
    if prob.M > max_candidates:
        raise RefusedScale(f"exhaustive search refused for {prob.M} candidates (limit {max_candidates})")
    t0 = time.perf_counter()
    best, best_val, best_key = (), math.inf, None
    count = 0
    subsets = list(feasible_subsets(prob))
    values = prob.evaluator.traces(subsets)
    for combo, val in zip(subsets, values):
        count += 1
        key = gamma_key(combo, prob.M)
        if best_key is None or val < best_val or (val == best_val and key < best_key):
            best, best_val, best_key = combo, val, key
    if not math.isfinite(best_val):
        raise InfeasibleProblem("no affordable selection gives a convergent steady state")
    sol = PlacementSolution(prob.selection(best), best_val, Method.EXHAUSTIVE,
                            certificate=Certificate(best_val, 0.0, count),
                            wall_time=time.perf_counter() - t0, evaluations=count)
    return sol
