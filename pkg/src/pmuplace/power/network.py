"""Nodal admittance matrix and phasor measurement rows.

Complex quantities are expanded to real 2x2 blocks acting on per-bus
interleaved ``(re, im)`` pairs: a complex coefficient ``z`` becomes
``[[Re z, -Im z], [Im z, Re z]]``.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModelError


def real_block(z: complex) -> np.ndarray:
    return np.array([[z.real, -z.imag], [z.imag, z.real]])


def real_expand(Y: np.ndarray) -> np.ndarray:
    """Expand a complex ``N x N`` matrix to the interleaved real ``2N x 2N`` form."""
    Y = np.asarray(Y, dtype=complex)
    N, K = Y.shape
    out = np.zeros((2 * N, 2 * K))
    out[0::2, 0::2] = Y.real
    out[0::2, 1::2] = -Y.imag
    out[1::2, 0::2] = Y.imag
    out[1::2, 1::2] = Y.real
    return out


def load_admittance(case, load) -> complex:
    """Constant-impedance equivalent of a load at its operating voltage."""
    v = case.voltages[load.bus]
    return complex(load.p, -load.q) / abs(v) ** 2


def build_admittance_complex(case) -> np.ndarray:
    """Complex nodal admittance matrix including line charging and loads."""
    N = len(case.buses)
    Y = np.zeros((N, N), dtype=complex)
    connected = set()
    for br in case.branches:
        j, k = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        y = br.series_admittance
        half = 0.5j * br.b
        Y[j, j] += y + half
        Y[k, k] += y + half
        Y[j, k] -= y
        Y[k, j] -= y
        connected.update((j, k))
    for ld in case.loads:
        k = case.bus_index(ld.bus)
        Y[k, k] += load_admittance(case, ld)
    if N > 1:
        lonely = [case.buses[i].id for i in range(N) if i not in connected]
        if lonely:
            raise ModelError(f"bus(es) without any branch: {', '.join(lonely)}")
    return Y


def build_admittance(case) -> np.ndarray:
    """Real-expanded admittance matrix of size ``2 N_bus``."""
    return real_expand(build_admittance_complex(case))


def branch_current_coefficients(case, from_bus, to_bus):
    """Complex coefficients ``(a_from, a_to)`` with ``I = a_from v_from + a_to v_to``.

    The current is measured at the ``from_bus`` end and includes that end's
    half of the line charging.
    """
    br = case.find_branch(from_bus, to_bus)
    y = br.series_admittance
    return y + 0.5j * br.b, -y


def voltage_row(case, bus, n_d, n):
    C = np.zeros((2, n))
    k = case.bus_index(bus)
    C[0, n_d + 2 * k] = 1.0
    C[1, n_d + 2 * k + 1] = 1.0
    return C


def branch_current_row(case, from_bus, to_bus, n_d, n):
    a_from, a_to = branch_current_coefficients(case, from_bus, to_bus)
    C = np.zeros((2, n))
    j, k = case.bus_index(from_bus), case.bus_index(to_bus)
    C[:, n_d + 2 * j:n_d + 2 * j + 2] = real_block(a_from)
    C[:, n_d + 2 * k:n_d + 2 * k + 2] = real_block(a_to)
    return C


def injected_current_row(case, bus, n_d, n, Y_real=None):
    if Y_real is None:
        Y_real = build_admittance(case)
    k = case.bus_index(bus)
    C = np.zeros((2, n))
    C[:, n_d:] = Y_real[2 * k:2 * k + 2]
    return C
