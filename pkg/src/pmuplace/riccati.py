"""Steady-state covariance of the descriptor Kalman filter.

The one-step covariance map is

    g(P) = [E^T (Q + A P A^T)^{-1} E + S]^{-1}

and the steady-state covariance is its fixed point.  Two routes are
provided: plain fixed-point iteration from ``alpha * I`` (the reference
route) and a Newton iteration whose linear solves are Stein equations
``X - L X L^T = B`` with ``L = g(P) E^T (Q + A P A^T)^{-1} A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import NotDetectable, NumericalError

_potrf, _potri, _trtrs = la.lapack.get_lapack_funcs(("potrf", "potri", "trtrs"), dtype=np.float64)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
# eigenvalues below RANK_TOL * n * max eigenvalue count toward a reported rank deficiency
RANK_TOL = float(np.finfo(float).eps)
# a converged iterate must reproduce itself under one more step to this relative accuracy
VALIDATION_TOL = 1e-6
# iterations allowed without a tenfold drop of the best residual before giving up
STALL_WINDOW = 5_000
# trace growth beyond this multiple of the initial trace counts as divergence
DIVERGENCE_FACTOR = 1e8


@dataclass
class SteadyStateResult:
    P_inf: np.ndarray
    trace: float
    condition_number: float
    iterations: int
    residual: float
    converged: bool
    method: str = "fixed-point"


def _sym(M):
    return 0.5 * (M + M.T)


class RiccatiOperator:
    """The map ``P -> g(P)`` for a fixed system and precision matrix ``S``.

    Holds plain arrays so that repeated applications avoid attribute and
    validation overhead.
    """

    def __init__(self, sys, S):
        self.E = np.asarray(sys.E, dtype=float)
        self.A = np.asarray(sys.A, dtype=float)
        self.Q = _sym(np.asarray(sys.Q, dtype=float))
        S = np.asarray(S, dtype=float)
        n = self.E.shape[1]
        if S.shape != (n, n) or self.A.shape != self.E.shape:
            raise NumericalError(f"inconsistent dimensions: E {self.E.shape}, A {self.A.shape}, S {S.shape}")
        self.S = _sym(S)
        self.n = n
        self.n_eq = self.E.shape[0]
        # A is often sparse in structure (zero algebraic rows); skip work on zero rows
        self._a_rows = np.flatnonzero(np.any(self.A != 0.0, axis=1))
        self._A_live = self.A[self._a_rows]

    def _inner_factor(self, P):
        Pi = self.Q.copy()
        if self._a_rows.size == self.n_eq:
            Pi += self.A @ P @ self.A.T
        elif self._a_rows.size:
            AP = self._A_live @ P
            idx = self._a_rows
            Pi[np.ix_(idx, idx)] += AP @ self._A_live.T
        # potrf reads the lower triangle only, so no symmetrization is needed
        Lp, info = _potrf(Pi, lower=1, clean=1)
        if info != 0:
            raise NumericalError("Q + A P A^T is not positive definite")
        return Lp

    def information(self, P):
        """Return ``(M, W, Lp)`` with ``M = E^T Pi^{-1} E + S``, ``W = Lp^{-1} E`` and ``Lp Lp^T = Pi``."""
        if not np.isfinite(P).all():
            raise NumericalError("covariance iterate is not finite")
        Lp = self._inner_factor(P)
        W, _ = _trtrs(Lp, self.E, lower=1)
        return W.T @ W + self.S, W, Lp

    def invert_information(self, M):
        d = M.diagonal().copy()
        if not (d > 0.0).all() or not np.isfinite(d).all():
            bad = int(np.sum(~(d > 0.0)))
            raise NotDetectable(max(bad, 1), "state directions without information")
        s = 1.0 / np.sqrt(d)
        scale = np.outer(s, s)
        Ms = M * scale
        # a failed factorization of the Jacobi-scaled matrix is the singularity test;
        # tiny positive pivots are legitimate when the prior is very diffuse
        Lm, info = _potrf(Ms, lower=1, clean=1)
        if info != 0:
            ev = np.linalg.eigvalsh(Ms)
            deficiency = int(np.sum(ev <= RANK_TOL * self.n * max(ev.max(), 1.0)))
            raise NotDetectable(max(deficiency, 1))
        inv, info = _potri(Lm, lower=1)
        if info != 0:
            raise NotDetectable(1)
        # potri fills the lower triangle only (the upper one is zero after the clean factorization)
        P = inv + inv.T
        np.fill_diagonal(P, inv.diagonal())
        return P * scale

    def __call__(self, P):
        M, _, _ = self.information(P)
        return self.invert_information(M)

    def closed_loop(self, P, gP=None):
        """Return ``(g(P), L)`` where ``L`` is the linearization factor of ``g`` at ``P``.

        The Fréchet derivative of ``g`` at ``P`` is ``dP -> L dP L^T``.
        """
        M, W, Lp = self.information(P)
        gP = self.invert_information(M) if gP is None else gP
        # E^T Pi^{-1} A = W^T (Lp^{-1} A)
        LA, _ = _trtrs(Lp, self.A, lower=1)
        return gP, gP @ (W.T @ LA)


def riccati_step(P, sys, S):
    """Apply one step of the descriptor covariance recursion."""
    P = np.asarray(P, dtype=float)
    try:
        np.linalg.cholesky(_sym(P))
    except np.linalg.LinAlgError:
        raise NumericalError("P is not symmetric positive definite") from None
    return RiccatiOperator(sys, S)(_sym(P))


def initial_covariance(sys) -> np.ndarray:
    alpha = 1e6 * float(np.trace(sys.Q)) / sys.n_eq
    return alpha * np.eye(sys.n)


def _rel_change(P_new, P_old):
    d = P_new - P_old
    denom = math.sqrt(np.vdot(P_new, P_new))
    return math.sqrt(np.vdot(d, d)) / denom if denom > 0 else math.inf


def _is_fixed_point(op, P):
    """Check a claimed fixed point: SPD and mapped to itself within ``VALIDATION_TOL``."""
    if _potrf(_sym(P), lower=1)[1] != 0:
        return False
    try:
        return _rel_change(op(P), P) <= VALIDATION_TOL
    except (NotDetectable, NumericalError):
        return False


def _result(P, iterations, residual, converged, method, op=None):
    # near-singular maps can stall with a small step size away from any fixed point
    if converged and op is not None:
        converged = _is_fixed_point(op, P)
    if converged:
        tr = float(np.trace(P))
        cond = condition_number(P)
    else:
        tr, cond = math.inf, math.inf
    return SteadyStateResult(P, tr, cond, iterations, residual, converged, method)


def solve_steady_state(sys, S, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, *,
                       method="fixed-point", P0=None, trace_history=None):
    """Iterate the covariance recursion to its fixed point.

    ``method="fixed-point"`` iterates ``P_k = g(P_{k-1})`` from
    ``P0 = alpha I`` with ``alpha = 1e6 tr(Q) / n_eq`` until the relative
    Frobenius change drops below ``tol``.  ``method="newton"`` runs a few
    fixed-point steps and then Newton steps; it falls back to plain
    iteration whenever a Newton step is not contractive.

    Non-convergence is reported through ``converged=False`` (and an
    infinite trace).  Besides the iteration cap this covers divergence,
    stalls where the residual stops improving, and a final iterate that
    is not reproduced by one more step.  A rank-deficient information
    matrix raises :class:`NotDetectable`.
    """
    op = RiccatiOperator(sys, S)
    P = initial_covariance(sys) if P0 is None else _sym(np.asarray(P0, dtype=float))
    if method == "fixed-point":
        return _fixed_point(op, P, tol, max_iter, trace_history)
    if method == "newton":
        return _newton(op, P, tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


class _Progress:
    """Declares a stall when the best residual has not dropped tenfold within ``STALL_WINDOW`` steps."""

    def __init__(self, it):
        self.best = math.inf
        self.best_it = it
        self.stalled = False

    def update(self, it, residual):
        if residual < 0.1 * self.best:
            self.best, self.best_it = residual, it
        elif it - self.best_it > STALL_WINDOW:
            self.stalled = True
        return self.stalled


def _fixed_point(op, P, tol, max_iter, trace_history=None, start_iter=0, label="fixed-point",
                 progress=None):
    limit = DIVERGENCE_FACTOR * max(float(np.trace(P)), 1e-300)
    progress = progress or _Progress(start_iter)
    residual = math.inf
    if trace_history is not None:
        trace_history.append(float(np.trace(P)))
    it = start_iter
    while it < max_iter:
        P_new = op(P)
        it += 1
        residual = _rel_change(P_new, P)
        P = P_new
        tr = float(np.trace(P))
        if trace_history is not None:
            trace_history.append(tr)
        if not math.isfinite(tr) or tr > limit:
            return _result(P, it, residual, False, label)
        if residual < tol:
            return _result(P, it, residual, True, label, op)
        if progress.update(it, residual):
            return _result(P, it, residual, False, label)
    return _result(P, it, residual, False, label)


def _newton(op, P, tol, max_iter, warmup=3):
    limit = DIVERGENCE_FACTOR * max(float(np.trace(P)), 1e-300)
    it = 0
    for _ in range(min(warmup, max_iter)):
        P = op(P)
        it += 1
    progress = _Progress(it)
    fallback_steps = 25
    while it < max_iter:
        gP, L = op.closed_loop(P)
        residual = _rel_change(gP, P)
        if residual < tol:
            return _result(gP, it, residual, True, "newton", op)
        tr = float(np.trace(gP))
        if not math.isfinite(tr) or tr > limit or progress.update(it, residual):
            return _result(gP, it, residual, False, "newton")
        it += 1
        P_new = _newton_step(P, gP, L)
        if P_new is not None:
            P = P_new
            continue
        # not contractive yet: take plain steps and try again
        stop = min(max_iter, it + fallback_steps)
        res = _fixed_point(op, gP, tol, stop, start_iter=it, label="newton", progress=progress)
        if res.converged or res.iterations >= max_iter or progress.stalled:
            return res
        tr = float(np.trace(res.P_inf))
        if not math.isfinite(tr) or tr > limit:
            return res
        P, it = res.P_inf, res.iterations
        fallback_steps = min(2 * fallback_steps, 10_000)
    gP = op(P)
    return _result(gP, it, _rel_change(gP, P), False, "newton")


def _newton_step(P, gP, L):
    rho = np.max(np.abs(np.linalg.eigvals(L))) if L.size else 0.0
    if not rho < 1.0 - 1e-10:
        return None
    try:
        dP = la.solve_discrete_lyapunov(L, gP - P)
        P_new = _sym(P + dP)
        np.linalg.cholesky(P_new)
    except (np.linalg.LinAlgError, ValueError):
        return None
    return P_new if np.all(np.isfinite(P_new)) else None


def fixed_point_residual(sys, S, P) -> float:
    """``||P - g(P)||_F / ||P||_F``."""
    P = np.asarray(P, dtype=float)
    gP = RiccatiOperator(sys, S)(_sym(P))
    return float(np.linalg.norm(P - gP) / np.linalg.norm(P))


def condition_number(P) -> float:
    """Ratio of extreme singular values; ``inf`` for a singular matrix."""
    sv = np.linalg.svd(np.asarray(P, dtype=float), compute_uv=False)
    if sv.size == 0:
        return 1.0
    if sv[-1] <= 0.0:
        return math.inf
    return float(sv[0] / sv[-1])


def trace_gradient(sys, S, P, informations):
    """Sensitivity of ``tr P_inf`` to the weight of each information matrix.

    For ``S(w) = S + sum_i w_i S_i`` the derivative at ``w = 0`` is
    ``-tr(P V P S_i)`` where ``V`` solves the adjoint Stein equation
    ``V - L^T V L = I``.  ``P`` must be the fixed point for ``S``.
    """
    op = RiccatiOperator(sys, S)
    _, L = op.closed_loop(P, gP=P)
    V = la.solve_discrete_lyapunov(L.T, np.eye(op.n))
    PVP = P @ _sym(V) @ P
    return np.array([-float(np.sum(PVP * Si)) for Si in informations])
