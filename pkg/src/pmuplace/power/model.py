"""From a case definition to a discrete descriptor system and PMU candidates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..descriptor import (
    AlgebraicCoords,
    CandidateKind,
    DescriptorSystem,
    MeasurementCandidate,
    transform_algebraic_coordinates,
)
from ..errors import ModelError
from . import generator as machine
from .network import (
    branch_current_row,
    build_admittance,
    build_admittance_complex,
    injected_current_row,
    voltage_row,
)


@dataclass
class LinearizedModel:
    F_y: np.ndarray
    F_v: np.ndarray
    G_y: np.ndarray
    G_v: np.ndarray
    f0: np.ndarray
    g0: np.ndarray
    y0: np.ndarray
    v0: np.ndarray


@dataclass
class GeneratorSetpoints:
    y0: np.ndarray
    Pm: np.ndarray
    Ef: np.ndarray


def operating_voltages(case) -> np.ndarray:
    """Interleaved ``(re, im)`` operating voltages, length ``2 N_bus``."""
    v = np.empty(2 * len(case.buses))
    for k, b in enumerate(case.buses):
        z = case.voltages[b.id]
        v[2 * k], v[2 * k + 1] = z.real, z.imag
    return v


def _setpoints(case) -> GeneratorSetpoints:
    Yc = build_admittance_complex(case)
    vc = np.array([case.voltages[b.id] for b in case.buses])
    injection = Yc @ vc
    y0, Pm, Ef = [], [], []
    for g in case.generators:
        k = case.bus_index(g.bus)
        x, pm, ef = machine.initialize(g, vc[k], complex(injection[k]), case.omega_base)
        y0.extend(x)
        Pm.append(pm)
        Ef.append(ef)
    return GeneratorSetpoints(np.array(y0, dtype=float), np.array(Pm), np.array(Ef))


def initialize_generators(case) -> np.ndarray:
    """Internal generator states at the case's operating point (ω = 1)."""
    return _setpoints(case).y0


def _bus_slices(case):
    retained = [case.bus_index(b) for b in case.retained_buses]
    rows = np.array([r for k in retained for r in (2 * k, 2 * k + 1)], dtype=int)
    return retained, rows


def residuals(case, y, v, setpoints=None):
    """Nonlinear right-hand sides ``(f, g)`` at differential states ``y`` and voltages ``v``.

    ``g`` stacks the current mismatch ``(Y v)_k - I_gen,k`` of every
    non-boundary bus, real part first.
    """
    sp = _setpoints(case) if setpoints is None else setpoints
    Yr = build_admittance(case)
    _, rows = _bus_slices(case)
    net = Yr @ v
    f = np.zeros(4 * len(case.generators))
    for i, g in enumerate(case.generators):
        k = case.bus_index(g.bus)
        fi, cur = machine.evaluate(g, y[4 * i:4 * i + 4], v[2 * k:2 * k + 2], sp.Pm[i], sp.Ef[i],
                                   case.omega_base)
        f[4 * i:4 * i + 4] = fi
        net[2 * k:2 * k + 2] -= cur
    return f, net[rows]


def linearize(case) -> LinearizedModel:
    """Analytic Jacobians of the generator ODEs and the network balance at the operating point."""
    sp = _setpoints(case)
    v0 = operating_voltages(case)
    Yr = build_admittance(case)
    retained, rows = _bus_slices(case)
    n_d = 4 * len(case.generators)
    n_a = v0.size

    F_y = np.zeros((n_d, n_d))
    F_v = np.zeros((n_d, n_a))
    Gfull_y = np.zeros((n_a, n_d))
    Gfull_v = Yr.copy()
    for i, g in enumerate(case.generators):
        k = case.bus_index(g.bus)
        sl = slice(4 * i, 4 * i + 4)
        vs = slice(2 * k, 2 * k + 2)
        fx, fV, Ix, IV = machine.jacobian(g, sp.y0[sl], v0[vs], case.omega_base)
        F_y[sl, sl] = fx
        F_v[sl, vs] = fV
        Gfull_y[vs, sl] -= Ix
        Gfull_v[vs, vs] -= IV

    f0, g0 = residuals(case, sp.y0, v0, sp)
    return LinearizedModel(F_y, F_v, Gfull_y[rows], Gfull_v[rows], f0, g0, sp.y0, v0)


def state_labels(case) -> tuple:
    labels = [f"{g.id}.{name}" for g in case.generators for name in machine.STATE_NAMES]
    for b in case.buses:
        labels += [f"V{b.id}.re", f"V{b.id}.im"]
    return tuple(labels)


def process_noise(case) -> np.ndarray:
    diag = []
    for g in case.generators:
        diag.extend(case.noise_differential[g.id])
    for bid in case.retained_buses:
        diag.extend(case.noise_algebraic[bid])
    return np.diag(np.array(diag, dtype=float))


def discretize(lin: LinearizedModel, case) -> DescriptorSystem:
    """Implicit-Euler descriptor form of the linearized DAE.

    ``y_k - y_{k-1} = h f(y_k, v_k)`` and ``0 = g(y_k, v_k)``, both linearized,
    give ``E = [[I - h F_y, -h F_v], [G_y, G_v]]`` and ``A = [[I, 0], [0, 0]]``.
    """
    h = case.step_size
    n_d, n_a = lin.F_v.shape
    n_g = lin.G_v.shape[0]
    I = np.eye(n_d)
    E = np.block([[I - h * lin.F_y, -h * lin.F_v], [lin.G_y, lin.G_v]])
    A = np.zeros_like(E)
    A[:n_d, :n_d] = I
    delta = np.concatenate([
        h * (lin.f0 - lin.F_y @ lin.y0 - lin.F_v @ lin.v0),
        lin.G_y @ lin.y0 + lin.G_v @ lin.v0 - lin.g0,
    ])
    return DescriptorSystem(E=E, A=A, delta=delta, Q=process_noise(case), n_d=n_d, n_a=n_a,
                            n_g=n_g, state_labels=state_labels(case),
                            algebraic_coords=AlgebraicCoords.VOLTAGES)


def build_candidates(case, sys: DescriptorSystem) -> list:
    """PMU candidates of the case, expressed in voltage coordinates."""
    if sys.algebraic_coords is not AlgebraicCoords.VOLTAGES:
        raise ModelError("candidates are built in voltage coordinates")
    n_d, n = sys.n_d, sys.n
    Yr = build_admittance(case)
    out = []
    for spec in case.candidates:
        if spec.kind == "NodeVoltage":
            C = voltage_row(case, spec.bus, n_d, n)
        elif spec.kind == "BranchCurrent":
            C = branch_current_row(case, spec.from_bus, spec.to_bus, n_d, n)
        elif spec.kind == "NodeInjectedCurrent":
            C = injected_current_row(case, spec.bus, n_d, n, Yr)
        else:
            raise ModelError(f"unknown candidate kind {spec.kind!r}")
        out.append(MeasurementCandidate(spec.id, CandidateKind(spec.kind), C, np.diag(spec.R), spec.cost))
    return out


@dataclass
class CaseModel:
    case: object
    system: DescriptorSystem
    candidates: list
    admittance: np.ndarray
    linearized: LinearizedModel

    def in_coordinates(self, coords) -> tuple:
        """``(system, candidates)`` in voltage or current algebraic coordinates."""
        coords = AlgebraicCoords(coords)
        if coords is AlgebraicCoords.VOLTAGES:
            return self.system, self.candidates
        return transform_algebraic_coordinates(self.system, self.candidates, self.admittance)

    def equation_rows(self, bus_id) -> tuple:
        """Rows of ``Q`` belonging to the balance equation of ``bus_id``."""
        retained = self.case.retained_buses
        if bus_id not in retained:
            raise ModelError(f"bus {bus_id!r} has no retained balance equation")
        base = self.system.n_d + 2 * retained.index(bus_id)
        return (base, base + 1)


def build_model(case, *, tol=1e-6) -> CaseModel:
    """Linearize and discretize a case; reject inconsistent operating points."""
    lin = linearize(case)
    if lin.f0.size and np.max(np.abs(lin.f0)) > tol:
        raise ModelError(f"operating point is not a steady state (|f0| = {np.max(np.abs(lin.f0)):.3e})")
    if lin.g0.size and np.max(np.abs(lin.g0)) > tol:
        raise ModelError(f"operating point violates the network balance (|g0| = {np.max(np.abs(lin.g0)):.3e})")
    sys = discretize(lin, case)
    return CaseModel(case, sys, build_candidates(case, sys), build_admittance(case), lin)
