"""Experiment drivers behind the command line: solves, sweeps and certificate runs.

Every driver returns a list of plain records (dicts) sorted in a fixed
order, so output bytes never depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .descriptor import (
    AlgebraicCoords,
    candidate_informations,
    transform_algebraic_coordinates,
)
from .errors import ModelError, NotDetectable, NumericalError, RefusedScale
from .placement import (
    InfeasibleProblem,
    Method,
    PlacementProblem,
    branch_and_bound,
    exhaustive,
    greedy_best_in,
    greedy_worst_out,
    verify_certificate,
)
from .placement.exhaustive import MAX_CANDIDATES
from .power import build_model, load_case
from .riccati import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_steady_state

METHOD_ORDER = (Method.BRANCH_AND_BOUND, Method.GREEDY_BEST_IN, Method.GREEDY_WORST_OUT, Method.EXHAUSTIVE)
RESAMPLE_CAP = 200
INSUFFICIENT = "insufficient convergent samples"


@dataclass
class SolverSettings:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    workers: int = 1
    timings: bool = False


def load_model(case):
    return build_model(load_case(case))


def system_in(model, coords, sys=None):
    """``(system, candidates)`` in the requested algebraic coordinates, optionally for a modified system."""
    coords = AlgebraicCoords(coords)
    base = model.system if sys is None else sys
    if coords is AlgebraicCoords.VOLTAGES:
        return base, model.candidates
    return transform_algebraic_coordinates(base, model.candidates, model.admittance)


def resolve_methods(spec, M) -> list:
    """Parse ``all`` or a comma list.

    ``all`` means the three solvers; the exhaustive oracle runs only when
    named, and is rejected up front when ``M`` exceeds its guard.
    """
    if spec == "all":
        return [m for m in METHOD_ORDER if m is not Method.EXHAUSTIVE]
    out = []
    for name in spec.split(","):
        try:
            m = Method(name.strip())
        except ValueError:
            raise ModelError(f"unknown method {name!r}") from None
        if m not in out:
            out.append(m)
    if Method.EXHAUSTIVE in out and M > MAX_CANDIDATES:
        raise RefusedScale(f"exhaustive search refused for {M} candidates (limit {MAX_CANDIDATES})")
    return sorted(out, key=METHOD_ORDER.index)


def run_method(prob, method):
    method = Method(method)
    if method is Method.BRANCH_AND_BOUND:
        return branch_and_bound(prob)
    if method is Method.GREEDY_BEST_IN:
        return greedy_best_in(prob)
    if method is Method.GREEDY_WORST_OUT:
        return greedy_worst_out(prob)
    return exhaustive(prob)


def _problem(sys, cands, budget, settings):
    return PlacementProblem(sys, cands, budget, tol=settings.tol, max_iter=settings.max_iter,
                            workers=settings.workers)


def _solution_fields(sol, cands, method, settings):
    rec = {
        "method": Method(method).value,
        "selected": sol.selected_ids(cands) if sol is not None else [],
        "objective": sol.objective if sol is not None else math.inf,
        "gap": sol.certificate.gap if sol is not None and sol.certificate and method is Method.BRANCH_AND_BOUND
        else None,
        "flags": list(sol.flags) if sol is not None else ["Infeasible"],
    }
    if settings.timings:
        rec["wall_time"] = sol.wall_time if sol is not None else 0.0
    return rec


def _solve_one(prob, cands, method, settings):
    try:
        sol = run_method(prob, method)
    except InfeasibleProblem:
        sol = None
    return sol, _solution_fields(sol, cands, Method(method), settings)


def solve(model, coords, method, budget, settings=None):
    """One record for one method at one budget, plus the solution and problem."""
    settings = settings or SolverSettings()
    sys, cands = system_in(model, coords)
    prob = _problem(sys, cands, budget, settings)
    sol, fields = _solve_one(prob, cands, method, settings)
    rec = {"budget": budget, **fields}
    return rec, sol, prob


def budget_sweep(model, coords, methods, b_min, b_max, settings=None) -> list:
    settings = settings or SolverSettings()
    if b_min > b_max:
        raise ModelError("b_min must not exceed b_max")
    sys, cands = system_in(model, coords)
    records = []
    for b in range(int(b_min), int(b_max) + 1):
        prob = _problem(sys, cands, b, settings)
        for m in methods:
            _, fields = _solve_one(prob, cands, m, settings)
            records.append({"budget": b, **fields})
    records.sort(key=lambda r: (METHOD_ORDER.index(Method(r["method"])), r["budget"]))
    return records


def noise_scales(scale_min, scale_max, points) -> list:
    if points < 1 or not (0 < scale_min <= scale_max):
        raise ModelError("need 0 < scale_min <= scale_max and at least one point")
    if points == 1:
        return [float(scale_min)]
    return [float(s) for s in np.logspace(math.log10(scale_min), math.log10(scale_max), points)]


def scaled_noise(sys, rows, scale):
    Q = np.array(sys.Q, dtype=float)
    for r in rows:
        if not 0 <= r < Q.shape[0]:
            raise ModelError(f"equation index {r} outside 0..{Q.shape[0] - 1}")
        Q[r, r] *= scale
    return sys.with_noise(Q)


def noise_sweep(model, coords, methods, budgets, rows, scales, settings=None) -> list:
    """Scale the chosen diagonal entries of ``Q`` and re-solve every method and budget."""
    settings = settings or SolverSettings()
    rows = tuple(rows)
    records = []
    for scale in scales:
        sys, cands = system_in(model, coords, scaled_noise(model.system, rows, scale))
        for b in budgets:
            prob = _problem(sys, cands, b, settings)
            for m in methods:
                _, fields = _solve_one(prob, cands, m, settings)
                records.append({"scale": scale, "rows": list(rows), "budget": b, **fields})
    records.sort(key=lambda r: (r["scale"], METHOD_ORDER.index(Method(r["method"])), r["budget"]))
    return records


class SubsetSampler:
    """Uniform k-subsets from the PCG64 64-bit stream.

    Bounded integers use rejection sampling on raw 64-bit words; subsets
    come from a partial Fisher-Yates shuffle.  Only the bit generator's
    raw output is used, so draws are identical across platforms and numpy
    releases.
    """

    def __init__(self, seed):
        self._bits = np.random.PCG64(int(seed))

    def _raw(self) -> int:
        return int(self._bits.random_raw())

    def below(self, n) -> int:
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self._raw()
            if r < limit:
                return r % n

    def subset(self, M, k) -> tuple:
        pool = list(range(M))
        for t in range(k):
            j = t + self.below(M - t)
            pool[t], pool[j] = pool[j], pool[t]
        return tuple(sorted(pool[:k]))


def condition_compare(model, counts, configs_per_count=20, seed=0, settings=None,
                      resample_cap=RESAMPLE_CAP) -> list:
    """Average condition number of ``P_inf`` in voltage and current coordinates over random subsets.

    The same subsets are used for both coordinates; a draw counts only if
    both solves converge.  When a count has no more subsets than
    requested, each subset is used exactly once.
    """
    settings = settings or SolverSettings()
    sv, cv = system_in(model, AlgebraicCoords.VOLTAGES)
    sc, cc = system_in(model, AlgebraicCoords.CURRENTS)
    infos = {"voltages": (sv, candidate_informations(cv)), "currents": (sc, candidate_informations(cc))}
    M = len(cv)
    sampler = SubsetSampler(seed)

    def cond(coords, subset):
        sys, inf = infos[coords]
        S = np.zeros((sys.n, sys.n))
        for i in subset:
            S += inf[i]
        try:
            res = solve_steady_state(sys, S, settings.tol, settings.max_iter, method="newton")
        except (NotDetectable, NumericalError):
            return None
        return res.condition_number if res.converged else None

    records = []
    for k in counts:
        if not 1 <= k <= M:
            raise ModelError(f"measurement count {k} outside 1..{M}")
        exhaustive_draws = math.comb(M, k) <= configs_per_count
        pool = list(combinations(range(M), k)) if exhaustive_draws else None
        values = {"voltages": [], "currents": []}
        attempts = 0
        while len(values["voltages"]) < configs_per_count and attempts < resample_cap:
            if exhaustive_draws:
                if attempts >= len(pool):
                    break
                subset = pool[attempts]
            else:
                subset = sampler.subset(M, k)
            attempts += 1
            cv_ = cond("voltages", subset)
            cc_ = cond("currents", subset)
            if cv_ is None or cc_ is None:
                continue
            values["voltages"].append(cv_)
            values["currents"].append(cc_)
        target = min(configs_per_count, len(pool)) if exhaustive_draws else configs_per_count
        flag = INSUFFICIENT if len(values["voltages"]) < target else ""
        for coords in ("currents", "voltages"):
            vals = values[coords]
            records.append({
                "count": k,
                "coords": coords,
                "mean_condition": float(np.mean(vals)) if vals else math.inf,
                "samples": len(vals),
                "attempts": attempts,
                "flag": flag,
            })
    records.sort(key=lambda r: (r["count"], r["coords"]))
    return records


def certify(model, coords, method, budget, settings=None, perturb=None):
    """Solve exactly, then check the LMI certificate at the optimum.

    ``perturb`` multiplies the covariance before the check, for exercising
    the failure path.
    """
    settings = settings or SolverSettings()
    method = Method(method)
    if method not in (Method.BRANCH_AND_BOUND, Method.EXHAUSTIVE):
        raise ModelError("certify needs an exact method (bnb or exhaustive)")
    rec, sol, prob = solve(model, coords, method, budget, settings)
    if sol is None or not math.isfinite(sol.objective):
        return rec, None
    ev = prob.evaluator
    gamma = np.zeros(prob.M)
    gamma[list(sol.indices)] = 1.0
    S = ev.precision(gamma)
    P = ev.result(sol.indices).P_inf
    if perturb is not None:
        P = P * float(perturb)
    report = verify_certificate(prob.sys, S, P)
    rec = {**rec,
           "fixed_point_residual": report.fixed_point_residual,
           "schur_pair_min_eig": report.schur_pair_min_eig,
           "theta_min_eig": report.theta_min_eig,
           "passed": report.passed}
    return rec, report
