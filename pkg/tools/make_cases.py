"""Regenerate the shipped case files under src/pmuplace/cases/.

Machine, line and load data are IEEE 39-bus derived placeholders.  Noise
and line parameters of the 3-bus case were tuned so that both greedy
methods are suboptimal at budget 2 under the default noise; generator
transient-voltage noise of the 11-bus case was tuned so that current
coordinates give the better-conditioned covariance on average.  Neither case carries
authoritative parameters.

The operating point comes from a small power flow solved here (boundary
buses are slack, generator buses PV, the rest PQ) and is written with
full float precision so the library's steady-state checks pass exactly.

Usage: python tools/make_cases.py [outdir]
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import fsolve

from pmuplace.power import parse_case
from pmuplace.power.model import _setpoints

OUT = Path(__file__).resolve().parents[1] / "src" / "pmuplace" / "cases"

# IEEE 39-bus machine data (system base), two-axis subset
MACHINES = {
    "33": dict(H=28.6, D=2.0, xd=0.262, xd_prime=0.0436, xq=0.258, xq_prime=0.166,
               ra=0.0, Td0_prime=5.69, Tq0_prime=1.5),
    "34": dict(H=26.0, D=2.0, xd=0.670, xd_prime=0.132, xq=0.620, xq_prime=0.166,
               ra=0.0, Td0_prime=5.4, Tq0_prime=0.44),
    "35": dict(H=34.8, D=2.0, xd=0.254, xd_prime=0.050, xq=0.241, xq_prime=0.0814,
               ra=0.0, Td0_prime=7.3, Tq0_prime=0.4),
    "36": dict(H=26.4, D=2.0, xd=0.295, xd_prime=0.049, xq=0.292, xq_prime=0.186,
               ra=0.0, Td0_prime=5.66, Tq0_prime=1.5),
}


def solve_power_flow(buses, branches, loads, gen_setpoints, slack_voltages):
    """Constant-power flow returning complex voltages keyed by bus id.

    ``gen_setpoints`` maps bus -> (P, |V|); ``slack_voltages`` bus -> complex V.
    """
    ids = [b["id"] for b in buses]
    idx = {b: i for i, b in enumerate(ids)}
    N = len(ids)
    Y = np.zeros((N, N), dtype=complex)
    for br in branches:
        j, k = idx[br["from"]], idx[br["to"]]
        y = 1.0 / complex(br["r"], br["x"])
        Y[j, j] += y + 0.5j * br.get("b", 0.0)
        Y[k, k] += y + 0.5j * br.get("b", 0.0)
        Y[j, k] -= y
        Y[k, j] -= y
    S_load = np.zeros(N, dtype=complex)
    for ld in loads:
        S_load[idx[ld["bus"]]] += complex(ld["p"], ld["q"])

    pv = [b for b in ids if b in gen_setpoints]
    pq = [b for b in ids if b not in gen_setpoints and b not in slack_voltages]

    def unpack(z):
        V = np.zeros(N, dtype=complex)
        for b, v in slack_voltages.items():
            V[idx[b]] = v
        pos = 0
        for b in pv:
            V[idx[b]] = gen_setpoints[b][1] * np.exp(1j * z[pos])
            pos += 1
        for b in pq:
            V[idx[b]] = complex(z[pos], z[pos + 1])
            pos += 2
        return V

    def mismatch(z):
        V = unpack(z)
        S = V * np.conj(Y @ V) + S_load
        out = []
        for b in pv:
            out.append(S[idx[b]].real - gen_setpoints[b][0])
        for b in pq:
            out.extend([S[idx[b]].real, S[idx[b]].imag])
        return out

    z0 = [0.0] * len(pv) + [1.0, 0.0] * len(pq)
    z, info, ier, msg = fsolve(mismatch, z0, xtol=1e-14, full_output=True)
    if max(abs(m) for m in mismatch(z)) > 1e-10:
        raise RuntimeError(f"power flow did not converge: {msg}")
    V = unpack(z)
    return {b: complex(V[idx[b]]) for b in ids}


def _finish(doc, pf):
    doc["operating_point"] = {
        "voltages": {b: [abs(v), math.atan2(v.imag, v.real)] for b, v in pf.items()},
    }
    case = parse_case(doc)
    sp = _setpoints(case)
    doc["operating_point"]["generators"] = {
        g.id: {"Pm": float(sp.Pm[i]), "Ef": float(sp.Ef[i])} for i, g in enumerate(case.generators)
    }
    parse_case(doc)
    return doc


def bus3(*, node2_noise=1.1e-4, line12=(0.002, 0.019, 0.0), line23=(0.002, 0.064, 0.0),
         r_v1=6e-6, r_v2=1.2e-5, r_i23=3.4e-4, r_v3=4e-6, r_i12=4.7e-5, pgen=(4.0, 3.0), load2=(2.0, 0.5),
         gen_noise=(1e-7, 1e-8, 1e-6, 1e-6), node_noise=2.5e-4):
    buses = [{"id": "1"}, {"id": "2"}, {"id": "3", "is_boundary": True}]
    branches = [
        {"from": "1", "to": "2", "r": line12[0], "x": line12[1], "b": line12[2]},
        {"from": "2", "to": "3", "r": line23[0], "x": line23[1], "b": line23[2]},
    ]
    loads = [{"bus": "2", "p": load2[0], "q": load2[1]}]
    gens = [dict(id="G1", bus="1", **MACHINES["33"]), dict(id="G2", bus="2", **MACHINES["35"])]
    pf = solve_power_flow(buses, branches, loads, {"1": (pgen[0], 1.03), "2": (pgen[1], 1.02)},
                          {"3": 1.0 + 0j})
    doc = {
        "schema_version": 1,
        "name": "bus3",
        "note": "Two generators feeding a boundary bus. Placeholder parameters, not from any publication.",
        "step_size": 0.02,
        "buses": buses,
        "branches": branches,
        "loads": loads,
        "generators": gens,
        "process_noise": {
            "differential": {"G1": list(gen_noise), "G2": list(gen_noise)},
            "algebraic": {"1": [node_noise, node_noise], "2": [node2_noise, node2_noise]},
        },
        "candidates": [
            {"kind": "NodeVoltage", "bus": "1", "R": [r_v1, r_v1]},
            {"kind": "NodeVoltage", "bus": "2", "R": [r_v2, r_v2]},
            {"kind": "BranchCurrent", "from": "2", "to": "3", "R": [r_i23, r_i23]},
            {"kind": "NodeVoltage", "bus": "3", "R": [r_v3, r_v3]},
            {"kind": "BranchCurrent", "from": "1", "to": "2", "R": [r_i12, r_i12]},
        ],
    }
    return _finish(doc, pf)


# IEEE 39-bus lines inside the 11-bus area (r, x, b)
LINES11 = [
    ("16", "19", 0.0016, 0.0195, 0.304),
    ("16", "21", 0.0008, 0.0135, 0.2548),
    ("16", "24", 0.0003, 0.0059, 0.068),
    ("19", "20", 0.0007, 0.0138, 0.0),
    ("19", "33", 0.0007, 0.0142, 0.0),
    ("20", "34", 0.0009, 0.0180, 0.0),
    ("21", "22", 0.0008, 0.0140, 0.2565),
    ("22", "23", 0.0006, 0.0096, 0.1846),
    ("22", "35", 0.0000, 0.0143, 0.0),
    ("23", "24", 0.0022, 0.0350, 0.361),
    ("23", "36", 0.0005, 0.0272, 0.0),
]

# candidate order as listed for the 11-bus study: voltages, branch currents, injections
CANDIDATES11 = (
    [("V", b) for b in ["16", "23", "21", "24", "20", "22", "19", "33", "34", "35", "36"]]
    + [("I", a, b) for a, b in [
        ("16", "19"), ("20", "19"), ("16", "24"), ("16", "21"), ("22", "21"), ("22", "23"),
        ("34", "20"), ("33", "19"), ("23", "24"), ("23", "36"), ("22", "35"), ("19", "16"),
        ("19", "20"), ("24", "16"), ("21", "16"), ("21", "22"), ("23", "22"), ("20", "34"),
        ("19", "33"), ("24", "23"), ("36", "23"), ("35", "22")]]
    + [("Iinj", b) for b in ["20", "23", "24", "16", "21"]]
)


def bus11(*, r_pmu=1e-6, gen_noise=(1e-7, 1e-7, 1e-4, 1e-4), node_noise=1e-4):
    ids = ["16", "19", "20", "21", "22", "23", "24", "33", "34", "35", "36"]
    buses = [{"id": b, "is_boundary": b == "16"} for b in ids]
    branches = [{"from": a, "to": b, "r": r, "x": x, "b": bb} for a, b, r, x, bb in LINES11]
    loads = [
        {"bus": "16", "p": 3.29, "q": 0.323},
        {"bus": "20", "p": 6.28, "q": 1.03},
        {"bus": "21", "p": 2.74, "q": 1.15},
        {"bus": "23", "p": 2.475, "q": 0.846},
        {"bus": "24", "p": 3.086, "q": -0.922},
    ]
    gens = [dict(id=f"G{b}", bus=b, **MACHINES[b]) for b in ["33", "34", "35", "36"]]
    setpoints = {"33": (6.32, 0.9972), "34": (5.08, 1.0123), "35": (6.50, 1.0493), "36": (5.60, 1.0635)}
    pf = solve_power_flow(buses, branches, loads, setpoints,
                          {"16": 1.0317 * complex(math.cos(-0.1004), math.sin(-0.1004))})
    candidates = []
    for c in CANDIDATES11:
        if c[0] == "V":
            candidates.append({"id": f"V_{c[1]}", "kind": "NodeVoltage", "bus": c[1], "R": [r_pmu, r_pmu]})
        elif c[0] == "I":
            candidates.append({"id": f"I_{c[1]}-{c[2]}", "kind": "BranchCurrent", "from": c[1], "to": c[2],
                               "R": [r_pmu, r_pmu]})
        else:
            candidates.append({"id": f"Iinj_{c[1]}", "kind": "NodeInjectedCurrent", "bus": c[1],
                               "R": [r_pmu, r_pmu]})
    doc = {
        "schema_version": 1,
        "name": "bus11",
        "note": "11-bus area of the IEEE 39-bus system with bus 16 as the boundary. "
                "Placeholder dynamic and noise parameters.",
        "step_size": 0.02,
        "buses": buses,
        "branches": branches,
        "loads": loads,
        "generators": gens,
        "process_noise": {
            "differential": {g["id"]: list(gen_noise) for g in gens},
            "algebraic": {b: [node_noise, node_noise] for b in ids if b != "16"},
        },
        "candidates": candidates,
    }
    return _finish(doc, pf)


def write(doc, path):
    path.write_text(json.dumps(doc, indent=1) + "\n")


def main(argv):
    out = Path(argv[1]) if len(argv) > 1 else OUT
    out.mkdir(parents=True, exist_ok=True)
    write(bus3(), out / "bus3.json")
    write(bus11(), out / "bus11.json")


if __name__ == "__main__":
    main(sys.argv)
