"""Greedy best-in and worst-out heuristics."""

from __future__ import annotations

import math
import time

from .problem import Method, PlacementSolution


def _argmin(values):
    # strict comparison keeps the lowest index among ties
    best, best_val = None, math.inf
    for i, v in values:
        if best is None or v < best_val:
            best, best_val = i, v
    return best, best_val


def greedy_best_in(prob) -> PlacementSolution:
    """Grow the selection one candidate at a time, always taking the best trace.

    Candidates that no longer fit in the remaining budget are skipped; the
    loop ends when nothing affordable is left.
    """
    t0 = time.perf_counter()
    ev = prob.evaluator
    chosen = []
    history = []
    spent = prob.cost(())
    while True:
        options = [i for i in range(prob.M)
                   if i not in chosen and spent + prob.costs[i] <= prob.budget_exact]
        if not options:
            break
        vals = ev.traces([chosen + [i] for i in options])
        j, val = _argmin(zip(options, vals))
        chosen.append(j)
        spent += prob.costs[j]
        history.append((j, val))
    objective = prob.objective(chosen)
    flags = () if math.isfinite(objective) else ("NonDetectable",)
    return PlacementSolution(prob.selection(chosen), objective, Method.GREEDY_BEST_IN,
                             wall_time=time.perf_counter() - t0, flags=flags,
                             evaluations=ev.solves, history=history)


def greedy_worst_out(prob) -> PlacementSolution:
    """Shrink the full set, removing the candidate whose loss hurts least.

    Removals that break convergence score ``inf``.  If every remaining
    removal diverges before the budget is met, the last convergent set is
    returned with the ``BudgetInfeasible`` flag.
    """
    t0 = time.perf_counter()
    ev = prob.evaluator
    current = list(range(prob.M))
    history = []
    flags = ()
    while not prob.affordable(current):
        options = list(current)
        vals = ev.traces([[k for k in current if k != i] for i in options])
        j, val = _argmin(zip(options, vals))
        if not math.isfinite(val):
            flags = ("BudgetInfeasible",)
            break
        current.remove(j)
        history.append((j, val))
    objective = prob.objective(current)
    return PlacementSolution(prob.selection(current), objective, Method.GREEDY_WORST_OUT,
                             wall_time=time.perf_counter() - t0, flags=flags,
                             evaluations=ev.solves, history=history)
