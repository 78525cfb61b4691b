"""Discrete-time descriptor systems and PMU measurement candidates.

A descriptor system evolves as ``E x_k = A x_{k-1} + delta + xi_k`` where
``E`` and ``A`` may be wide (fewer equations than states) and ``xi_k`` has
covariance ``Q``.  Each PMU candidate contributes a two-row linear
measurement ``z = C x + nu`` with noise covariance ``R``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .errors import ModelError


class AlgebraicCoords(str, enum.Enum):
    VOLTAGES = "voltages"
    CURRENTS = "currents"


class CandidateKind(str, enum.Enum):
    NODE_VOLTAGE = "NodeVoltage"
    BRANCH_CURRENT = "BranchCurrent"
    NODE_INJECTED_CURRENT = "NodeInjectedCurrent"


def _frozen(a, ndim=None):
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ModelError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DescriptorSystem:
    """Linearized discrete-time DAE model ``E x_k = A x_{k-1} + delta + xi_k``.

    Differential states come first (``n_d`` of them), followed by ``n_a``
    algebraic states.  The last ``n_g`` rows of ``E``/``A`` are the retained
    algebraic equations.
    """

    E: np.ndarray
    A: np.ndarray
    delta: np.ndarray
    Q: np.ndarray
    n_d: int
    n_a: int
    n_g: int
    state_labels: tuple = ()
    algebraic_coords: AlgebraicCoords = AlgebraicCoords.VOLTAGES

    def __post_init__(self):
        E = _frozen(self.E, 2)
        A = _frozen(self.A, 2)
        Q = _frozen(self.Q, 2)
        delta = _frozen(self.delta, 1)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "algebraic_coords", AlgebraicCoords(self.algebraic_coords))
        n = self.n_d + self.n_a
        n_eq = self.n_d + self.n_g
        if self.n_g > self.n_a:
            raise ModelError(f"n_g={self.n_g} exceeds n_a={self.n_a}")
        if E.shape != (n_eq, n) or A.shape != (n_eq, n):
            raise ModelError(f"E {E.shape} and A {A.shape} must both be {(n_eq, n)}")
        if Q.shape != (n_eq, n_eq):
            raise ModelError(f"Q has shape {Q.shape}, expected {(n_eq, n_eq)}")
        if delta.shape != (n_eq,):
            raise ModelError(f"delta has shape {delta.shape}, expected {(n_eq,)}")
        labels = tuple(self.state_labels) or tuple(f"x{i}" for i in range(n))
        if len(labels) != n:
            raise ModelError(f"{len(labels)} state labels for {n} states")
        object.__setattr__(self, "state_labels", labels)

    @property
    def n(self) -> int:
        return self.n_d + self.n_a

    @property
    def n_eq(self) -> int:
        """Number of equations (rows of E), written ñ in the usual notation."""
        return self.n_d + self.n_g

    def with_noise(self, Q) -> "DescriptorSystem":
        return replace(self, Q=Q)


@dataclass(frozen=True, eq=False)
class MeasurementCandidate:
    """One PMU measurement: real and imaginary part of a phasor."""

    id: str
    kind: CandidateKind
    C: np.ndarray
    R: np.ndarray
    cost: float = 1.0

    def __post_init__(self):
        C = _frozen(self.C, 2)
        R = _frozen(self.R, 2)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "kind", CandidateKind(self.kind))
        if C.shape[0] != 2:
            raise ModelError(f"candidate {self.id}: C must have 2 rows, got {C.shape[0]}")
        if R.shape != (2, 2):
            raise ModelError(f"candidate {self.id}: R must be 2x2, got {R.shape}")
        if not self.cost >= 0:
            raise ModelError(f"candidate {self.id}: cost must be nonnegative")
        object.__setattr__(self, "cost", float(self.cost))

    def information(self) -> np.ndarray:
        """Return ``C^T R^{-1} C`` using a Cholesky solve on ``R``."""
        try:
            factor = la.cho_factor(_sym(self.R), lower=True)
        except la.LinAlgError:
            raise ModelError(f"candidate {self.id}: R is not positive definite") from None
        return self.C.T @ la.cho_solve(factor, self.C)


@dataclass(frozen=True)
class SensorSelection:
    """Binary selection vector over a candidate set."""

    gamma: tuple

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(int(bool(g)) for g in self.gamma))

    @classmethod
    def from_indices(cls, indices, size) -> "SensorSelection":
        chosen = set(indices)
        if any(i < 0 or i >= size for i in chosen):
            raise ModelError(f"selection index out of range for {size} candidates")
        return cls(tuple(int(i in chosen) for i in range(size)))

    @classmethod
    def empty(cls, size) -> "SensorSelection":
        return cls((0,) * size)

    @classmethod
    def full(cls, size) -> "SensorSelection":
        return cls((1,) * size)

    def __len__(self):
        return len(self.gamma)

    @property
    def indices(self) -> tuple:
        return tuple(i for i, g in enumerate(self.gamma) if g)

    def cost(self, candidates: Sequence[MeasurementCandidate]) -> float:
        return float(sum(c.cost for c, g in zip(candidates, self.gamma) if g))


def _sym(M):
    return 0.5 * (M + M.T)


def candidate_informations(candidates: Sequence[MeasurementCandidate]) -> list:
    """Per-candidate information matrices ``C_i^T R_i^{-1} C_i``."""
    if not candidates:
        return []
    n = candidates[0].C.shape[1]
    for c in candidates:
        if c.C.shape[1] != n:
            raise ModelError(f"candidate {c.id} has {c.C.shape[1]} columns, expected {n}")
    return [c.information() for c in candidates]


def assemble_precision(candidates: Sequence[MeasurementCandidate], selection, n=None) -> np.ndarray:
    """Assimilated sensing precision ``S = sum_i gamma_i C_i^T R_i^{-1} C_i``.

    ``selection`` may be a :class:`SensorSelection` or any sequence of 0/1
    (fractional weights are accepted too).
    ``n`` is only needed when the candidate list is empty.
    """
    gamma = selection.gamma if isinstance(selection, SensorSelection) else tuple(selection)
    if len(gamma) != len(candidates):
        raise ModelError(f"selection has length {len(gamma)} but there are {len(candidates)} candidates")
    infos = candidate_informations(candidates)
    if n is None:
        if not candidates:
            raise ModelError("state dimension unknown for an empty candidate set")
        n = candidates[0].C.shape[1]
    S = np.zeros((n, n))
    for w, info in zip(gamma, infos):
        if w:
            if info.shape != S.shape:
                raise ModelError(f"candidate dimension {info.shape[0]} does not match n={n}")
            S += w * info
    return _sym(S)


def coordinate_transform(sys: DescriptorSystem, Y) -> np.ndarray:
    """``T = blockdiag(I_{n_d}, Y)`` mapping voltage coordinates to currents."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (sys.n_a, sys.n_a):
        raise ModelError(f"Y has shape {Y.shape}, expected {(sys.n_a, sys.n_a)}")
    return la.block_diag(np.eye(sys.n_d), Y)


def transform_algebraic_coordinates(sys: DescriptorSystem, candidates, Y, *, max_cond=1e12):
    """Re-express algebraic states as injected currents ``i = Y v``.

    Returns the transformed system and candidates.  Columns of ``E``, ``A``
    and every ``C_i`` are multiplied by ``T^{-1}``; ``Q`` and ``delta`` are
    untouched because equations are not recombined.
    """
    if sys.algebraic_coords is not AlgebraicCoords.VOLTAGES:
        raise ModelError("system is not expressed in voltage coordinates")
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (sys.n_a, sys.n_a):
        raise ModelError(f"Y has shape {Y.shape}, expected {(sys.n_a, sys.n_a)}")
    cond = np.linalg.cond(Y) if Y.size else 1.0
    if not np.isfinite(cond) or cond >= max_cond:
        raise ModelError(f"admittance matrix is singular or ill-conditioned (cond={cond:.3g})")
    return _apply_transform(sys, candidates, Y, AlgebraicCoords.CURRENTS)


def _apply_transform(sys, candidates, Y, coords):
    lu = la.lu_factor(Y)
    nd = sys.n_d

    def right_inv(M):
        # M @ blockdiag(I, Y)^{-1}, via a solve against Y^T on the algebraic block
        out = np.array(M, dtype=float)
        if sys.n_a:
            out[:, nd:] = la.lu_solve(lu, M[:, nd:].T, trans=1).T
        return out

    prefix = {AlgebraicCoords.CURRENTS: "I", AlgebraicCoords.VOLTAGES: "V"}[coords]
    labels = list(sys.state_labels[:nd])
    for lab in sys.state_labels[nd:]:
        head, _, tail = lab.partition(".")
        if head[:1] in ("V", "I") and tail:
            labels.append(prefix + head[1:] + "." + tail)
        else:
            labels.append(lab)
    new_sys = replace(sys, E=right_inv(sys.E), A=right_inv(sys.A),
                      state_labels=tuple(labels), algebraic_coords=coords)
    new_cands = [replace(c, C=right_inv(c.C)) for c in candidates]
    return new_sys, new_cands


def inverse_transform_algebraic_coordinates(sys: DescriptorSystem, candidates, Y):
    """Undo :func:`transform_algebraic_coordinates` (currents back to voltages)."""
    if sys.algebraic_coords is not AlgebraicCoords.CURRENTS:
        raise ModelError("system is not expressed in current coordinates")
    return _apply_transform(sys, candidates, np.linalg.inv(np.asarray(Y, dtype=float)),
                            AlgebraicCoords.VOLTAGES)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_system(sys: DescriptorSystem) -> ValidationReport:
    """Check the structural invariants of a descriptor system.

    Never raises; every failed check is recorded in the report.
    """
    report = ValidationReport()
    n, n_eq = sys.n, sys.n_eq
    report.checks.append(CheckResult(
        "dimensions", n_eq <= n and sys.E.shape == (n_eq, n), float(n - n_eq),
        f"n={n}, n_eq={n_eq}"))

    Q = sys.Q
    qnorm = np.linalg.norm(Q)
    sym_res = np.linalg.norm(Q - Q.T) / qnorm if qnorm > 0 else 0.0
    report.checks.append(CheckResult("Q_symmetric", sym_res <= 1e-12, float(sym_res)))

    try:
        np.linalg.cholesky(_sym(Q))
        chol_ok, min_eig = True, float(np.linalg.eigvalsh(_sym(Q)).min())
    except np.linalg.LinAlgError:
        chol_ok, min_eig = False, float(np.linalg.eigvalsh(_sym(Q)).min())
    report.checks.append(CheckResult("Q_cholesky", chol_ok, min_eig))

    sv = np.linalg.svd(sys.E, compute_uv=False)
    ratio = float(sv.min() / sv.max()) if sv.size and sv.max() > 0 else 0.0
    report.checks.append(CheckResult("E_full_row_rank", ratio > 1e-10, ratio,
                                     "sigma_min/sigma_max of E"))
    return report
