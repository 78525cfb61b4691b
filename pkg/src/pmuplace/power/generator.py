"""Two-axis (fourth-order) synchronous generator model.

States per machine, in order: rotor angle ``delta``, speed ``omega`` (p.u.),
d-axis transient voltage ``ed`` and q-axis transient voltage ``eq``::

    d(delta)/dt = omega_b (omega - 1)
    d(omega)/dt = (Pm - Pe - D (omega - 1)) / (2 H)
    d(eq)/dt    = (-eq - (xd - xd') id + Ef) / Td0'
    d(ed)/dt    = (-ed + (xq - xq') iq) / Tq0'

    Pe = ed id + eq iq + (xq' - xd') id iq

with the stator algebra ``vd = ed + xq' iq - ra id`` and
``vq = eq - xd' id - ra iq``.  Machine and network frames are related by
``(vd + j vq) e^{j(delta - pi/2)} = V``, the same rotation mapping
``id + j iq`` to the injected network current.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from ..errors import ModelError

N_STATES = 4
STATE_NAMES = ("delta", "omega", "ed", "eq")


def _zinv(gen):
    # [ra, -xq'; xd', ra] [id; iq] = [ed - vd; eq - vq]
    Z = np.array([[gen.ra, -gen.xq_prime], [gen.xd_prime, gen.ra]])
    return np.linalg.inv(Z)


def park(delta, Vr, Vi):
    """Network-frame voltage to machine ``(vd, vq)``."""
    s, c = math.sin(delta), math.cos(delta)
    return Vr * s - Vi * c, Vr * c + Vi * s


def stator_currents(gen, delta, ed, eq, Vr, Vi):
    vd, vq = park(delta, Vr, Vi)
    i_d, i_q = _zinv(gen) @ np.array([ed - vd, eq - vq])
    return float(i_d), float(i_q), vd, vq


def electrical_power(gen, ed, eq, i_d, i_q):
    return ed * i_d + eq * i_q + (gen.xq_prime - gen.xd_prime) * i_d * i_q


def evaluate(gen, x, V, Pm, Ef, omega_base):
    """Return ``(f, I)``: state derivatives (4,) and injected current ``(re, im)``."""
    delta, omega, ed, eq = x
    Vr, Vi = V
    i_d, i_q, _, _ = stator_currents(gen, delta, ed, eq, Vr, Vi)
    pe = electrical_power(gen, ed, eq, i_d, i_q)
    f = np.array([
        omega_base * (omega - 1.0),
        (Pm - pe - gen.D * (omega - 1.0)) / (2.0 * gen.H),
        (-ed + (gen.xq - gen.xq_prime) * i_q) / gen.Tq0_prime,
        (-eq - (gen.xd - gen.xd_prime) * i_d + Ef) / gen.Td0_prime,
    ])
    s, c = math.sin(delta), math.cos(delta)
    current = np.array([i_d * s + i_q * c, -i_d * c + i_q * s])
    return f, current


def jacobian(gen, x, V, omega_base):
    """Analytic derivatives at ``(x, V)``.

    Returns ``(f_x, f_V, I_x, I_V)`` with shapes (4,4), (4,2), (2,4), (2,2).
    """
    delta, omega, ed, eq = x
    Vr, Vi = V
    s, c = math.sin(delta), math.cos(delta)
    Zi = _zinv(gen)
    i_d, i_q, vd, vq = stator_currents(gen, delta, ed, eq, Vr, Vi)

    # columns: delta, omega, ed, eq, Vr, Vi
    dv = np.zeros((2, 6))
    dv[:, 0] = (vq, -vd)
    dv[:, 4] = (s, c)
    dv[:, 5] = (-c, s)
    de = np.zeros((2, 6))
    de[0, 2] = 1.0
    de[1, 3] = 1.0
    di = Zi @ (de - dv)

    dpe = (i_d * de[0] + i_q * de[1]
           + (ed + (gen.xq_prime - gen.xd_prime) * i_q) * di[0]
           + (eq + (gen.xq_prime - gen.xd_prime) * i_d) * di[1])

    J = np.zeros((4, 6))
    J[0, 1] = omega_base
    J[1] = -dpe / (2.0 * gen.H)
    J[1, 1] -= gen.D / (2.0 * gen.H)
    J[2] = ((gen.xq - gen.xq_prime) * di[1] - de[0]) / gen.Tq0_prime
    J[3] = (-(gen.xd - gen.xd_prime) * di[0] - de[1]) / gen.Td0_prime

    rot = np.array([[s, c], [-c, s]])
    dI = rot @ di
    dI[:, 0] += (i_d * c - i_q * s, i_d * s + i_q * c)
    return J[:, :4], J[:, 4:], dI[:, :4], dI[:, 4:]


def initialize(gen, V: complex, I: complex, omega_base, tol=1e-8):
    """Steady-state internal states for terminal voltage ``V`` and injected current ``I``.

    Returns ``(x, Pm, Ef)``.  If the generator carries its own ``Pm``/``Ef``
    they are used as given, and a nonzero steady-state residual beyond
    ``tol`` raises :class:`ModelError`.
    """
    eQ = V + complex(gen.ra, gen.xq) * I
    if abs(eQ) == 0:
        raise ModelError(f"generator {gen.id}: degenerate operating point")
    delta = cmath.phase(eQ)
    rot = cmath.exp(-1j * (delta - math.pi / 2))
    idq = I * rot
    vdq = V * rot
    i_d, i_q = idq.real, idq.imag
    vq = vdq.imag
    ed = (gen.xq - gen.xq_prime) * i_q
    eq = vq + gen.xd_prime * i_d + gen.ra * i_q
    Ef = eq + (gen.xd - gen.xd_prime) * i_d
    Pm = electrical_power(gen, ed, eq, i_d, i_q)
    if gen.Pm is not None:
        Pm = gen.Pm
    if gen.Ef is not None:
        Ef = gen.Ef
    x = np.array([delta, 1.0, ed, eq])
    f, current = evaluate(gen, x, (V.real, V.imag), Pm, Ef, omega_base)
    mismatch = max(np.max(np.abs(f)), abs(complex(*current) - I))
    if mismatch > tol:
        raise ModelError(f"generator {gen.id}: inconsistent operating point "
                         f"(steady-state residual {mismatch:.3e})")
    return x, Pm, Ef
