"""Exact branch-and-bound over binary sensor selections.

Lower bounds rest on two monotonicity facts.  Adding sensors never
increases the steady-state covariance, so the all-on fixed point
``P_low`` lies below the fixed point of every subset.  The covariance map
is monotone in ``P``, so for any subset ``L`` one map step from ``P_low``
gives ``tr g_L(P_low) <= tr P_inf(L)``, and further steps only tighten
that bound.

``g_L(P_low) = (K + S_L)^{-1}`` with ``K`` fixed, so a node is bounded by
how much a completion can raise the spectrum of ``K + S_F``: a completion
of at most ``k`` rank-one pieces raises eigenvalue ``i`` no further than
eigenvalue ``i + k`` of the base, and never past the spectrum with every
undecided candidate switched on.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from ..errors import NotDetectable, NumericalError
from ..riccati import RiccatiOperator
from .exhaustive import gamma_key
from .greedy import greedy_best_in
from .problem import Certificate, InfeasibleProblem, Method, PlacementSolution

DEFAULT_ABS_GAP = 1e-9
# relative slack applied to every derived bound to absorb rounding
BOUND_SAFETY = 1e-6
REFINE_STEPS = 20
# Woodbury screening is used only below this scaled condition estimate
WOODBURY_PIVOT = 1e-8


@dataclass
class NodeRecord:
    forced_on: tuple
    forced_off: tuple
    undecided: tuple
    bound: float


@dataclass
class _Node:
    F: tuple
    start: int
    cost: object
    leaves: tuple = ()  # ((lb, completion), ...) when the node is a leaf batch


@dataclass
class BnBStats:
    nodes: int = 0
    leaf_screens: int = 0
    refined: int = 0
    exact: int = 0
    pruned: int = 0
    records: list = field(default_factory=list)


class _Bounds:
    """Spectral and one-step lower bounds anchored at the all-on covariance."""

    def __init__(self, prob, P_low):
        ev = prob.evaluator
        self.sys = prob.sys
        self.infos = ev.infos
        n = prob.sys.n
        self.n = n
        self.K0 = RiccatiOperator(prob.sys, np.zeros((n, n))).information(P_low)[0]
        self.P_low = P_low
        self.ranks = [int(np.linalg.matrix_rank(S)) if np.any(S) else 0 for S in self.infos]
        # information = Z^T Z with Z = R^{-1/2} C, stacked and zero-padded
        p = max((c.C.shape[0] for c in prob.candidates), default=0)
        Z = np.zeros((prob.M, p, n))
        for i, c in enumerate(prob.candidates):
            L = np.linalg.cholesky(np.asarray(c.R, dtype=float))
            Z[i, :c.C.shape[0]] = la.solve_triangular(L, np.asarray(c.C, dtype=float), lower=True)
        self.Z = Z

    def base(self, F):
        B = self.K0.copy()
        for i in F:
            B += self.infos[i]
        return B

    @staticmethod
    def _trace_inv_from_eigs(lam, scale):
        lam = lam + 1e-12 * max(scale, 1e-300)
        if np.any(lam <= 0.0):
            return math.inf
        return float(np.sum(1.0 / lam)) * (1.0 - BOUND_SAFETY)

    def spectral(self, B, S_U, k):
        """Bound over completions of rank at most ``k`` dominated by ``S_U``."""
        lam = np.linalg.eigvalsh(B)
        mu = np.linalg.eigvalsh(B + S_U)
        n = lam.size
        k = min(k, n)
        u = mu.copy()
        if k < n:
            u[:n - k] = np.minimum(mu[:n - k], lam[k:])
        return self._trace_inv_from_eigs(u, float(mu[-1]))

    def one_step(self, B, completion):
        M = B.copy()
        for j in completion:
            M += self.infos[j]
        lam = np.linalg.eigvalsh(M)
        return self._trace_inv_from_eigs(lam, float(lam[-1]))

    def singles(self, B, js):
        """One-step bounds for ``B`` alone and for ``B`` plus each single candidate."""
        js = list(js)
        d = np.diag(B)
        if np.all(d > 0):
            s = 1.0 / np.sqrt(d)
            try:
                Lb = np.linalg.cholesky(B * s[:, None] * s[None, :])
                ok = np.min(np.diag(Lb)) ** 2 > WOODBURY_PIVOT
            except np.linalg.LinAlgError:
                ok = False
        else:
            ok = False
        if not ok:
            alone = self.one_step(B, ())
            return alone, [self.one_step(B, (j,)) for j in js]
        Binv = la.cho_solve((Lb, True), np.diag(s)) * s[:, None]
        Binv = 0.5 * (Binv + Binv.T)
        base = float(np.trace(Binv))
        if not js:
            return base * (1.0 - BOUND_SAFETY), []
        Zj = self.Z[js]
        W = Zj @ Binv
        G = W @ np.transpose(Zj, (0, 2, 1))
        H = W @ np.transpose(W, (0, 2, 1))
        G[:, np.arange(G.shape[1]), np.arange(G.shape[1])] += 1.0
        drop = np.trace(np.linalg.solve(G, H), axis1=1, axis2=2)
        vals = (base - drop) * (1.0 - BOUND_SAFETY)
        return base * (1.0 - BOUND_SAFETY), [float(v) if v > 0 else 0.0 for v in vals]

    def refine(self, leaf, start_bound, target, steps):
        """Iterate ``g_L`` upward from ``P_low``; stop once the bound reaches ``target``."""
        S = np.zeros((self.n, self.n))
        for j in leaf:
            S += self.infos[j]
        op = RiccatiOperator(self.sys, S)
        P = self.P_low
        best = start_bound
        for _ in range(steps):
            try:
                P = op(P)
            except NotDetectable:
                return math.inf
            except NumericalError:
                return best
            best = max(best, float(np.trace(P)) * (1.0 - BOUND_SAFETY))
            if best >= target:
                break
        return best


def _branching_order(prob, full_trace):
    """Candidates sorted by how much the all-on trace grows when each is removed."""
    M = prob.M
    everything = list(range(M))
    vals = prob.evaluator.traces([[k for k in everything if k != i] for i in everything])
    inc = [v - full_trace for v in vals]
    return sorted(everything, key=lambda i: (-inc[i], i))


def branch_and_bound(prob, *, abs_gap=DEFAULT_ABS_GAP, time_limit=None, record_nodes=False,
                     refine_steps=REFINE_STEPS) -> PlacementSolution:
    """Certified minimizer of ``tr P_inf(gamma)`` under the budget.

    Nodes fix a set of candidates on, a set off and leave the rest
    undecided.  Candidates are ranked once by their single-removal trace
    increase at the all-on configuration; a child switches on one more
    candidate and switches off every undecided candidate ranked before it.
    Exploration is best-first by lower bound with insertion order breaking
    ties, and the incumbent starts from greedy best-in.
    """
    t0 = time.perf_counter()
    ev = prob.evaluator
    M = prob.M
    everything = tuple(range(M))
    full = ev.result(everything)
    if full is None:
        raise InfeasibleProblem("the full candidate set does not give a convergent steady state")
    stats = BnBStats()

    def finish(best, best_val, lower, flags=()):
        gap = best_val - lower if math.isfinite(best_val) else math.inf
        if math.isfinite(best_val):
            gap = max(gap, 0.0)
        return PlacementSolution(
            prob.selection(best), best_val, Method.BRANCH_AND_BOUND,
            certificate=Certificate(min(lower, best_val), gap, stats.nodes),
            wall_time=time.perf_counter() - t0, flags=tuple(flags), evaluations=ev.solves,
            history=stats.records if record_nodes else [])

    budget = prob.budget_exact
    costs = prob.costs
    if prob.affordable(everything):
        stats.nodes = 1
        if record_nodes:
            stats.records.append(NodeRecord(everything, (), (), full.trace))
        return finish(everything, full.trace, full.trace)

    seed = greedy_best_in(prob)
    best = tuple(sorted(seed.indices))
    best_val = seed.objective
    best_key = gamma_key(best, M)

    order = _branching_order(prob, full.trace)
    bounds = _Bounds(prob, full.P_inf)
    suffix = [np.zeros((prob.sys.n, prob.sys.n)) for _ in range(M + 1)]
    for q in range(M - 1, -1, -1):
        suffix[q] = suffix[q + 1] + ev.infos[order[q]]

    lower_pruned = math.inf

    def threshold():
        return best_val - abs_gap

    def record(F, start, U, bound):
        stats.nodes += 1
        if record_nodes:
            off = tuple(sorted(order[q] for q in range(start) if order[q] not in F))
            stats.records.append(NodeRecord(tuple(sorted(F)), off, tuple(sorted(U)), bound))

    def make_node(F, start, cost):
        """Bound a node; return ``(bound, node)``."""
        nonlocal lower_pruned
        rb = budget - cost
        U = [order[q] for q in range(start, M) if costs[order[q]] <= rb]
        B = bounds.base(F)
        if sum((costs[j] for j in U), cost * 0) <= rb:
            # everything left fits: by monotonicity the best completion takes all of it
            leaf = tuple(sorted(F + tuple(U)))
            lb = bounds.one_step(B, U)
            record(F, start, U, lb)
            return lb, _Node(F, start, cost, ((lb, leaf),))
        cap, spent = 0, 0
        for c in sorted(costs[j] for j in U):
            if spent + c > rb:
                break
            spent += c
            cap += 1
        if cap <= 1:
            alone, singles = bounds.singles(B, U)
            leaves = [(alone, tuple(sorted(F)))]
            leaves += [(v, tuple(sorted(F + (j,)))) for v, j in zip(singles, U)]
            stats.leaf_screens += len(leaves)
            lb = min(v for v, _ in leaves)
            record(F, start, U, lb)
            cut = threshold()
            keep = tuple(sorted((v, leaf) for v, leaf in leaves if v < cut))
            if len(keep) < len(leaves):
                dropped = min(v for v, _ in leaves if v >= cut)
                lower_pruned = min(lower_pruned, dropped)
            return lb, _Node(F, start, cost, keep)
        S_U = suffix[start].copy()
        for q in range(start, M):
            if costs[order[q]] > rb:
                S_U -= ev.infos[order[q]]
        rank = sum(sorted((bounds.ranks[j] for j in U), reverse=True)[:cap])
        lb = bounds.spectral(B, S_U, rank)
        record(F, start, U, lb)
        return lb, _Node(F, start, cost)

    heap = []
    counter = 0
    lb, root = make_node((), 0, prob.cost(()))
    heapq.heappush(heap, (lb, counter, root))
    flags = []

    def consider(leaf, val):
        nonlocal best, best_val, best_key
        key = gamma_key(leaf, M)
        if val < best_val or (val == best_val and key < best_key):
            best, best_val, best_key = leaf, val, key

    while heap:
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            flags.append("TimeLimit")
            lower_pruned = min(lower_pruned, heap[0][0])
            break
        lb, _, node = heapq.heappop(heap)
        if lb >= threshold():
            stats.pruned += 1
            lower_pruned = min(lower_pruned, lb)
            continue
        if node.leaves:
            pending = []
            for v, leaf in node.leaves:
                if v >= threshold():
                    lower_pruned = min(lower_pruned, v)
                    continue
                pending.append((v, leaf))
            step = max(1, ev.workers)
            for pos in range(0, len(pending), step):
                chunk = []
                for v, leaf in pending[pos:pos + step]:
                    if v >= threshold():
                        lower_pruned = min(lower_pruned, v)
                        continue
                    if ev.is_cached(leaf):
                        chunk.append(leaf)
                        continue
                    stats.refined += 1
                    v = bounds.refine(leaf, v, threshold(), refine_steps)
                    if v >= threshold():
                        lower_pruned = min(lower_pruned, v)
                        continue
                    chunk.append(leaf)
                stats.exact += len(chunk)
                for leaf, val in zip(chunk, ev.traces(chunk)):
                    consider(leaf, val)
            continue
        rb = budget - node.cost
        for q in range(node.start, M):
            j = order[q]
            if costs[j] > rb:
                continue
            child_F = node.F + (j,)
            clb, child = make_node(child_F, q + 1, node.cost + costs[j])
            clb = max(clb, lb)
            if clb >= threshold():
                stats.pruned += 1
                lower_pruned = min(lower_pruned, clb)
                continue
            counter += 1
            heapq.heappush(heap, (clb, counter, child))

    if not math.isfinite(best_val):
        raise InfeasibleProblem("no affordable selection gives a convergent steady state")
    return finish(best, best_val, min(lower_pruned, best_val), flags)
