"""Numerical check that a steady-state covariance is feasible for the LMI reformulation.

With ``X = P^{-1}`` the two blocks

    [[P, I], [I, X]]

and

    [[X + A^T Q^{-1} A, 0,  A^T Q^{-1} E    ],
     [0,                X,  X               ],
     [E^T Q^{-1} A,     X,  E^T Q^{-1} E + S]]

must both be positive semidefinite at a fixed point of the covariance map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from ..errors import NumericalError
from ..riccati import fixed_point_residual

RESIDUAL_TOL = 1e-7
EIG_TOL = 1e-7


@dataclass
class CertificateReport:
    fixed_point_residual: float
    schur_pair_min_eig: float
    theta_min_eig: float
    passed: bool
    schur_pair_norm: float = 0.0
    theta_norm: float = 0.0


def _sym(M):
    return 0.5 * (M + M.T)


def theta_block(sys, S, X) -> np.ndarray:
    """The three-by-three block matrix evaluated at ``X``."""
    E, A = np.asarray(sys.E, float), np.asarray(sys.A, float)
    Lq = la.cho_factor(_sym(np.asarray(sys.Q, float)), lower=True)
    QiA = la.cho_solve(Lq, A)
    QiE = la.cho_solve(Lq, E)
    n = X.shape[0]
    Z = np.zeros((n, n))
    return _sym(np.block([
        [X + A.T @ QiA, Z, A.T @ QiE],
        [Z, X, X],
        [E.T @ QiA, X, E.T @ QiE + np.asarray(S, float)],
    ]))


def schur_pair(P, X) -> np.ndarray:
    I = np.eye(P.shape[0])
    return _sym(np.block([[P, I], [I, X]]))


def _min_eig_and_norm(M):
    ev = np.linalg.eigvalsh(M)
    return float(ev[0]), float(np.max(np.abs(ev)))


def verify_certificate(sys, S, P) -> CertificateReport:
    """Assemble both blocks at ``X = P^{-1}`` and report residual and minimum eigenvalues."""
    P = _sym(np.asarray(P, dtype=float))
    if not np.all(np.isfinite(P)):
        raise NumericalError("P is not finite")
    try:
        Lp = la.cho_factor(P, lower=True)
    except la.LinAlgError:
        raise NumericalError("P is not symmetric positive definite") from None
    X = _sym(la.cho_solve(Lp, np.eye(P.shape[0])))
    residual = fixed_point_residual(sys, S, P)
    pair_min, pair_norm = _min_eig_and_norm(schur_pair(P, X))
    theta_min, theta_norm = _min_eig_and_norm(theta_block(sys, S, X))
    passed = bool(residual < RESIDUAL_TOL
                  and pair_min > -EIG_TOL * pair_norm
                  and theta_min > -EIG_TOL * theta_norm)
    return CertificateReport(residual, pair_min, theta_min, passed, pair_norm, theta_norm)
