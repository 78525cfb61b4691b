import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from _systems import random_instance, scalar_system
from pmuplace import MeasurementCandidate, ModelError, RefusedScale
from pmuplace.descriptor import CandidateKind
from pmuplace.placement import (
    InfeasibleProblem,
    Method,
    PlacementProblem,
    branch_and_bound,
    exhaustive,
    greedy_best_in,
    greedy_worst_out,
)


def problem(sys, cands, budget, **kw):
    return PlacementProblem(sys, cands, budget, **kw)


def bus3_problem(model, budget):
    return problem(model.system, model.candidates, budget)


def ids(sol, cands):
    return sol.selected_ids(cands)


def _all_affordable_traces(prob):
    out = {}
    for k in range(prob.M + 1):
        for combo in itertools.combinations(range(prob.M), k):
            if prob.affordable(combo):
                out[combo] = prob.objective(combo)
    return out


# problem set-up ---------------------------------------------------------------------------

def test_divergent_full_set_is_infeasible():
    cand = MeasurementCandidate("z", CandidateKind.NODE_VOLTAGE, [[0.0], [0.0]], np.eye(2))
    with pytest.raises(InfeasibleProblem):
        problem(scalar_system(A=2.0), [cand], 1)


def test_duplicate_ids_and_negative_budget():
    sys, cands, _ = random_instance(1)
    with pytest.raises(ModelError):
        problem(sys, [cands[0], cands[0]], 1)
    with pytest.raises(ModelError):
        problem(sys, cands, -1)


# greedy -----------------------------------------------------------------------------------

def test_best_in_with_zero_budget(bus3):
    sol = greedy_best_in(bus3_problem(bus3, 0))
    assert sol.indices == ()
    assert sol.objective == math.inf
    assert sol.flags == ("NonDetectable",)


def test_best_in_with_zero_budget_on_stable_system():
    sys, cands, _ = random_instance(2)
    prob = problem(sys, cands, 0)
    sol = greedy_best_in(prob)
    assert sol.indices == ()
    assert sol.objective == prob.objective(())


def test_saturated_budget_takes_everything():
    sys, cands, _ = random_instance(3)
    prob = problem(sys, cands, len(cands))
    full = prob.objective(range(len(cands)))
    a = greedy_best_in(prob)
    b = greedy_worst_out(prob)
    assert a.indices == b.indices == tuple(range(len(cands)))
    assert a.objective == b.objective == full
    assert len(a.history) == len(cands)
    assert b.history == []


def test_best_in_locks_in_first_choice(bus3):
    cands = bus3.candidates
    opt1 = exhaustive(bus3_problem(bus3, 1))
    opt2 = exhaustive(bus3_problem(bus3, 2))
    greedy = greedy_best_in(bus3_problem(bus3, 2))
    assert greedy.history[0][0] == opt1.indices[0]
    assert ids(greedy, cands) != ids(opt2, cands)
    assert greedy.objective > opt2.objective


def test_worst_out_drops_the_best_single_sensor(bus3):
    opt1 = exhaustive(bus3_problem(bus3, 1))
    sol = greedy_worst_out(bus3_problem(bus3, 1))
    assert sol.history[0][0] == opt1.indices[0]
    assert sol.objective > opt1.objective


def test_worst_out_budget_infeasible():
    cand = MeasurementCandidate("z", CandidateKind.NODE_VOLTAGE, [[1.0], [0.0]], np.eye(2))
    sol = greedy_worst_out(problem(scalar_system(A=2.0), [cand], 0))
    assert sol.flags == ("BudgetInfeasible",)
    assert sol.indices == (0,)


def _twins():
    cand = MeasurementCandidate("a", CandidateKind.NODE_VOLTAGE, [[1.0], [0.0]], np.eye(2))
    return scalar_system(A=0.5), [cand, replace(cand, id="b")]


def test_tie_breaking_rules():
    sys, twins = _twins()
    prob = problem(sys, twins, 1)
    assert prob.objective((0,)) == prob.objective((1,))
    assert greedy_best_in(prob).indices == (0,)
    # worst-out removes the lowest tied index first
    assert greedy_worst_out(prob).indices == (1,)
    # selection vectors compare lexicographically: (0, 1) < (1, 0)
    assert exhaustive(prob).indices == (1,)
    assert branch_and_bound(prob).indices == (1,)


@pytest.mark.parametrize("seed", range(8))
def test_exact_dominates_greedy(seed):
    sys, cands, b = random_instance(700 + seed, M_max=9)
    prob = problem(sys, cands, b)
    best = exhaustive(prob).objective
    for heuristic in (greedy_best_in, greedy_worst_out):
        sol = heuristic(prob)
        assert best <= sol.objective + 1e-12
        assert prob.affordable(sol.indices)


# exhaustive -------------------------------------------------------------------------------

def _three():
    # first seed whose single sensors all converge, so every subset is finite
    for seed in range(100):
        sys, cands, _ = random_instance(seed, M_min=3, M_max=3)
        prob = problem(sys, cands, 3)
        if all(math.isfinite(prob.objective((i,))) for i in range(3)):
            return sys, cands
    raise AssertionError("no suitable seed")


def test_exhaustive_counts_every_subset():
    sys, cands = _three()
    assert exhaustive(problem(sys, cands, 3)).evaluations == 8
    assert exhaustive(problem(sys, cands, 1)).evaluations == 4


def test_exhaustive_returns_the_minimum():
    sys, cands = _three()
    prob = problem(sys, cands, 2)
    table = _all_affordable_traces(prob)
    sol = exhaustive(prob)
    assert sol.objective == min(table.values())


def test_exhaustive_refuses_large_sets(bus11):
    with pytest.raises(RefusedScale):
        exhaustive(problem(bus11.system, bus11.candidates, 2))


def test_random_eight_candidate_cross_check():
    for seed in range(50):
        sys, cands, _ = random_instance(seed, M_min=8, M_max=8)
        if sys.n == 4:
            break
    assert sys.n == 4
    prob = problem(sys, cands, 3)
    a, b = branch_and_bound(prob), exhaustive(problem(sys, cands, 3))
    assert a.indices == b.indices
    assert a.objective == pytest.approx(b.objective, rel=1e-12)


# branch and bound -------------------------------------------------------------------------

def test_full_budget_returns_all_on_at_root():
    sys, cands, _ = random_instance(7)
    prob = problem(sys, cands, len(cands) + 0.5)
    sol = branch_and_bound(prob)
    assert sol.indices == tuple(range(len(cands)))
    assert sol.certificate.nodes_explored == 1
    assert sol.certificate.lower_bound == sol.objective


@pytest.mark.parametrize("budget", [1, 2, 3])
def test_bus3_matches_oracle(bus3, budget):
    a = branch_and_bound(bus3_problem(bus3, budget))
    b = exhaustive(bus3_problem(bus3, budget))
    assert a.indices == b.indices
    assert abs(a.objective - b.objective) <= 1e-8 * max(1.0, b.objective)


@pytest.mark.parametrize("seed", range(12))
def test_bounds_never_exceed_leaves_below(seed):
    sys, cands, b = random_instance(800 + seed, M_min=5, M_max=9)
    prob = problem(sys, cands, b)
    table = _all_affordable_traces(prob)
    if not math.isfinite(min(table.values())):
        with pytest.raises(InfeasibleProblem):
            branch_and_bound(prob)
        with pytest.raises(InfeasibleProblem):
            exhaustive(prob)
        return
    sol = branch_and_bound(prob, record_nodes=True)
    assert sol.history
    for rec in sol.history:
        below = [v for combo, v in table.items()
                 if set(rec.forced_on) <= set(combo)
                 and set(combo) <= set(rec.forced_on) | set(rec.undecided)]
        if below and math.isfinite(min(below)):
            assert rec.bound <= min(below) * (1 + 1e-9) + 1e-12
        assert not set(rec.forced_on) & set(rec.forced_off)


@pytest.mark.parametrize("seed", range(10))
def test_certificate_gap_and_budget(seed):
    sys, cands, b = random_instance(900 + seed)
    prob = problem(sys, cands, b)
    sol = branch_and_bound(prob)
    assert prob.affordable(sol.indices)
    assert math.isfinite(sol.objective)
    cert = sol.certificate
    assert cert.gap == pytest.approx(sol.objective - cert.lower_bound, abs=1e-15)
    assert cert.gap <= 1e-8 * max(1.0, sol.objective)


@pytest.mark.parametrize("seed", range(6))
def test_fractional_costs(seed):
    rng = np.random.default_rng(seed)
    sys, cands, _ = random_instance(1000 + seed, M_max=8)
    priced = [replace(c, cost=float(rng.choice([0.0, 0.5, 1.0, 1.5, 2.5]))) for c in cands]
    budget = float(rng.choice([1.0, 1.5, 2.5, 3.0]))
    try:
        prob = problem(sys, priced, budget)
    except InfeasibleProblem:
        pytest.skip("random costs made the instance infeasible")
    a = branch_and_bound(prob)
    b = exhaustive(problem(sys, priced, budget))
    assert a.indices == b.indices
    assert prob.cost(a.indices) <= budget


def test_tenth_budgets_compare_exactly():
    sys, cands, _ = random_instance(11, M_min=4, M_max=4)
    tenth = [replace(c, cost=0.1) for c in cands]
    # 3 * 0.1 > 0.3 in binary floating point, but not in exact arithmetic
    prob = problem(sys, tenth, 0.3)
    assert prob.affordable((0, 1, 2))
    assert len(branch_and_bound(prob).indices) == 3


@pytest.mark.parametrize("seed", range(4))
def test_workers_do_not_change_results(seed):
    sys, cands, b = random_instance(1100 + seed)
    results = []
    for workers in (1, 3):
        prob = problem(sys, cands, b, workers=workers)
        results.append([(s.indices, s.objective) for s in
                        (branch_and_bound(prob), greedy_best_in(prob), greedy_worst_out(prob))])
    assert results[0] == results[1]


def test_time_limit_is_flagged(bus3):
    prob = bus3_problem(bus3, 2)
    sol = branch_and_bound(prob, time_limit=0.0)
    assert "TimeLimit" in sol.flags
    assert sol.certificate.lower_bound <= sol.objective
    assert prob.affordable(sol.indices)


def test_methods_are_named():
    assert Method("bnb") is Method.BRANCH_AND_BOUND
    assert {m.value for m in Method} == {"bnb", "greedy-in", "greedy-out", "exhaustive"}
