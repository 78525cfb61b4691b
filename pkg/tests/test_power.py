import cmath
import copy
import json
import math

import numpy as np
import pytest
import sympy as sp

from pmuplace import ModelError
from pmuplace.power import (
    build_admittance,
    build_admittance_complex,
    build_candidates,
    build_model,
    discretize,
    initialize_generators,
    linearize,
    load_case,
    parse_case,
    residuals,
)
from pmuplace.power.model import _setpoints, operating_voltages
from pmuplace.power.network import branch_current_row, injected_current_row, load_admittance

MACHINE = dict(H=30.0, D=2.0, xd=0.26, xd_prime=0.044, xq=0.25, xq_prime=0.17,
               Td0_prime=5.7, Tq0_prime=1.5)


def doc(buses, branches=(), loads=(), generators=(), voltages=None, candidates=(), h=0.02):
    ids = [b["id"] for b in buses]
    boundary = {b["id"] for b in buses if b.get("is_boundary")}
    return {
        "schema_version": 1,
        "step_size": h,
        "buses": list(buses),
        "branches": list(branches),
        "loads": list(loads),
        "generators": list(generators),
        "operating_point": {"voltages": voltages or {i: [1.0, 0.0] for i in ids}},
        "process_noise": {
            "differential": {g["id"]: [1e-6] * 4 for g in generators},
            "algebraic": {i: [1e-4, 1e-4] for i in ids if i not in boundary},
        },
        "candidates": list(candidates),
    }


def two_bus(r=0.0, x=1.0, b=0.0):
    return parse_case(doc([{"id": "1"}, {"id": "2"}], [{"from": "1", "to": "2", "r": r, "x": x, "b": b}]))


# admittance -------------------------------------------------------------------------------

def test_textbook_two_bus_admittance():
    Y = build_admittance_complex(two_bus())
    np.testing.assert_allclose(Y, [[-1j, 1j], [1j, -1j]], atol=1e-15)


def test_half_shunt_split():
    base = build_admittance_complex(two_bus(r=0.1, x=0.5))
    charged = build_admittance_complex(two_bus(r=0.1, x=0.5, b=0.2))
    np.testing.assert_allclose(charged - base, np.diag([0.1j, 0.1j]), atol=1e-15)


def test_real_expansion_layout():
    Yr = build_admittance(two_bus())
    # -j as a real 2x2 block is [[0, 1], [-1, 0]]
    np.testing.assert_array_equal(Yr[:2, :2], [[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(Yr[:2, 2:], [[0.0, -1.0], [1.0, 0.0]])


def test_isolated_bus_is_rejected():
    case = parse_case(doc([{"id": "1"}, {"id": "2"}, {"id": "3"}],
                          [{"from": "1", "to": "2", "r": 0.0, "x": 1.0}]))
    with pytest.raises(ModelError, match="3"):
        build_admittance(case)


def _hand_admittance(raw):
    """Nodal admittance assembled directly from the JSON document."""
    ids = [b["id"] for b in raw["buses"]]
    at = {b: i for i, b in enumerate(ids)}
    volts = {b: m * cmath.exp(1j * a) for b, (m, a) in raw["operating_point"]["voltages"].items()}
    Y = np.zeros((len(ids), len(ids)), dtype=complex)
    for br in raw["branches"]:
        j, k = at[br["from"]], at[br["to"]]
        y = 1 / complex(br["r"], br["x"])
        sh = 1j * br.get("b", 0.0) / 2
        Y[j, j] += y + sh
        Y[k, k] += y + sh
        Y[j, k] += -y
        Y[k, j] += -y
    for ld in raw.get("loads", []):
        k = at[ld["bus"]]
        Y[k, k] += (ld["p"] - 1j * ld["q"]) / abs(volts[ld["bus"]]) ** 2
    return Y


@pytest.mark.parametrize("name", ["bus3", "bus11"])
def test_shipped_admittance_matches_hand_assembly(name):
    case = load_case(name)
    raw = json.loads(open(case.source).read())
    Y = build_admittance_complex(case)
    expected = _hand_admittance(raw)
    assert np.abs(Y - expected).max() <= 1e-12 * np.abs(expected).max()
    full = build_admittance(case)
    np.testing.assert_allclose(full[0::2, 0::2], expected.real, atol=1e-12)
    np.testing.assert_allclose(full[1::2, 0::2], expected.imag, atol=1e-12)


# generator initialization ---------------------------------------------------------------

def single_machine(V, load=None, ra=0.0):
    loads = [] if load is None else [{"bus": "1", "p": load[0], "q": load[1]}]
    gen = {"id": "G", "bus": "1", "ra": ra, **MACHINE}
    return parse_case(doc([{"id": "1"}], loads=loads, generators=[gen],
                          voltages={"1": [abs(V), cmath.phase(V)]}))


def test_no_load_machine():
    V = 1.05 * cmath.exp(0.3j)
    delta, omega, ed, eq = initialize_generators(single_machine(V))
    assert delta == pytest.approx(0.3, abs=1e-12)
    assert omega == 1.0
    assert eq == pytest.approx(1.05, abs=1e-12)
    assert ed == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("P,Q,theta", [(0.8, 0.3, 0.1), (1.5, -0.2, -0.4), (0.4, 0.6, 0.0)])
def test_loaded_lossless_machine_angle(P, Q, theta):
    V = 1.02 * cmath.exp(1j * theta)
    delta = initialize_generators(single_machine(V, load=(P, Q)))[0]
    # phasor diagram: E_Q = V + j xq I, with I = conj(S / V)
    expected = theta + math.atan2(MACHINE["xq"] * P, abs(V) ** 2 + MACHINE["xq"] * Q)
    assert delta == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("name", ["bus3", "bus11"])
def test_initialized_machines_are_at_rest(name):
    case = load_case(name)
    sp_ = _setpoints(case)
    f, g = residuals(case, sp_.y0, operating_voltages(case), sp_)
    assert np.abs(f).max() < 1e-8
    assert np.abs(g).max() < 1e-6


def test_inconsistent_setpoint_is_rejected():
    raw = doc([{"id": "1"}], loads=[{"bus": "1", "p": 1.0, "q": 0.2}],
              generators=[{"id": "G", "bus": "1", **MACHINE}])
    raw["operating_point"]["generators"] = {"G": {"Pm": 2.0}}
    with pytest.raises(ModelError, match="inconsistent"):
        initialize_generators(parse_case(raw))


# linearization ----------------------------------------------------------------------------

def _finite_difference(case, step=1e-6):
    sp_ = _setpoints(case)
    y0, v0 = sp_.y0, operating_voltages(case)

    def columns(vec, other, which):
        cols_f, cols_g = [], []
        for i in range(vec.size):
            e = np.zeros(vec.size)
            e[i] = step
            args_p = (vec + e, other) if which == "y" else (other, vec + e)
            args_m = (vec - e, other) if which == "y" else (other, vec - e)
            fp, gp = residuals(case, *args_p, sp_)
            fm, gm = residuals(case, *args_m, sp_)
            cols_f.append((fp - fm) / (2 * step))
            cols_g.append((gp - gm) / (2 * step))
        return np.array(cols_f).T, np.array(cols_g).T

    F_y, G_y = columns(y0, v0, "y")
    F_v, G_v = columns(v0, y0, "v")
    return F_y, F_v, G_y, G_v


def _max_relative_error(analytic, numeric, floor=1e-8):
    mask = np.abs(analytic) > floor
    assert not np.any(np.abs(numeric[~mask]) > 1e-5 * max(1.0, np.abs(analytic).max()))
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(analytic[mask] - numeric[mask]) / np.abs(analytic[mask])))


@pytest.mark.parametrize("name", ["bus3", "bus11"])
def test_jacobians_match_finite_differences(name):
    case = load_case(name)
    lin = linearize(case)
    for analytic, numeric in zip((lin.F_y, lin.F_v, lin.G_y, lin.G_v), _finite_difference(case)):
        assert analytic.shape == numeric.shape
        assert _max_relative_error(analytic, numeric) < 1e-5


def test_passive_network_is_its_own_jacobian():
    case = parse_case(doc([{"id": "1"}, {"id": "2"}, {"id": "3"}],
                          [{"from": "1", "to": "2", "r": 0.01, "x": 0.1, "b": 0.02},
                           {"from": "2", "to": "3", "r": 0.02, "x": 0.2}],
                          loads=[{"bus": "3", "p": 0.5, "q": 0.1}]))
    lin = linearize(case)
    np.testing.assert_array_equal(lin.G_v, build_admittance(case))
    assert lin.F_y.shape == (0, 0)


def test_balance_rows_follow_retained_buses(bus3, bus11):
    for model in (bus3, bus11):
        retained = len(model.case.retained_buses)
        assert model.linearized.G_y.shape[0] == 2 * retained
        assert model.linearized.G_v.shape[0] == 2 * retained


def test_shipped_three_bus_dimensions(bus3):
    sys = bus3.system
    assert (sys.n_d, sys.n_a, sys.n_g) == (8, 6, 4)
    assert sys.n_eq == 12 < sys.n == 14
    assert sys.E.shape == sys.A.shape == (12, 14)


def test_shipped_eleven_bus_candidates(bus11):
    assert len(bus11.candidates) == 38
    assert len({c.id for c in bus11.candidates}) == 38
    kinds = [c.kind.value for c in bus11.candidates]
    assert kinds.count("NodeVoltage") == 11
    assert kinds.count("NodeInjectedCurrent") == 5


# discretization ---------------------------------------------------------------------------

def test_zero_step_discretization(bus3):
    lin = bus3.linearized
    case = copy.copy(bus3.case)
    case.step_size = 0.0
    sys = discretize(lin, case)
    nd = sys.n_d
    np.testing.assert_array_equal(sys.E[:nd, :nd], np.eye(nd))
    np.testing.assert_array_equal(sys.E[:nd, nd:], 0.0)
    np.testing.assert_array_equal(sys.E[nd:], np.hstack([lin.G_y, lin.G_v]))
    expected_A = np.zeros_like(sys.A)
    expected_A[:nd, :nd] = np.eye(nd)
    np.testing.assert_array_equal(sys.A, expected_A)


@pytest.mark.parametrize("h", [1e-4, 1e-2, 0.05])
def test_descriptor_matrix_is_linear_in_step(bus3, h):
    lin = bus3.linearized
    case0, caseh = copy.copy(bus3.case), copy.copy(bus3.case)
    case0.step_size, caseh.step_size = 0.0, h
    diff = np.linalg.norm(discretize(lin, caseh).E - discretize(lin, case0).E)
    bound = h * (np.linalg.norm(lin.F_y) + np.linalg.norm(lin.F_v))
    assert diff <= bound * (1 + 1e-12)


def test_process_noise_layout(bus3):
    Q = np.diag(bus3.system.Q)
    assert Q.size == 12
    np.testing.assert_array_equal(Q[:4], [1e-7, 1e-8, 1e-6, 1e-6])
    np.testing.assert_array_equal(Q[8:10], [2.5e-4, 2.5e-4])


def test_symbolic_one_machine_toy():
    """Implicit-Euler descriptor matrices of one machine on a loaded bus, derived symbolically."""
    ra = 0.003
    case = single_machine(1.01 * cmath.exp(0.2j), load=(0.9, 0.25), ra=ra)
    model = build_model(case)
    sp_ = _setpoints(case)
    h = case.step_size

    d, w, ed, eq, vr, vi = sp.symbols("delta omega ed eq vr vi", real=True)
    m = {k: sp.nsimplify(v, rational=True) for k, v in MACHINE.items()}
    Pm, Ef = sp.Float(sp_.Pm[0], 30), sp.Float(sp_.Ef[0], 30)
    vd = vr * sp.sin(d) - vi * sp.cos(d)
    vq = vr * sp.cos(d) + vi * sp.sin(d)
    i_d, i_q = sp.symbols("i_d i_q")
    sol = sp.solve([sp.Eq(ed - vd, ra * i_d - m["xq_prime"] * i_q),
                    sp.Eq(eq - vq, m["xd_prime"] * i_d + ra * i_q)], [i_d, i_q], dict=True)[0]
    Id, Iq = sol[i_d], sol[i_q]
    Pe = ed * Id + eq * Iq + (m["xq_prime"] - m["xd_prime"]) * Id * Iq
    f = sp.Matrix([
        2 * sp.pi * 60 * (w - 1),
        (Pm - Pe - m["D"] * (w - 1)) / (2 * m["H"]),
        (-ed + (m["xq"] - m["xq_prime"]) * Iq) / m["Tq0_prime"],
        (-eq - (m["xd"] - m["xd_prime"]) * Id + Ef) / m["Td0_prime"],
    ])
    y_load = (sp.Rational(9, 10) - sp.Rational(1, 4) * sp.I) / sp.Float(1.01, 30) ** 2
    inj_re = Id * sp.sin(d) + Iq * sp.cos(d)
    inj_im = -Id * sp.cos(d) + Iq * sp.sin(d)
    g = sp.Matrix([
        sp.re(y_load) * vr - sp.im(y_load) * vi - inj_re,
        sp.im(y_load) * vr + sp.re(y_load) * vi - inj_im,
    ])
    ys, vs = [d, w, ed, eq], [vr, vi]
    point = dict(zip(ys + vs, list(sp_.y0) + list(operating_voltages(case))))

    def num(expr):
        return np.array(expr.subs(point).evalf(30), dtype=float)

    F_y, F_v = num(f.jacobian(ys)), num(f.jacobian(vs))
    G_y, G_v = num(g.jacobian(ys)), num(g.jacobian(vs))
    E = np.block([[np.eye(4) - h * F_y, -h * F_v], [G_y, G_v]])
    np.testing.assert_allclose(model.system.E, E, rtol=1e-10, atol=1e-12)
    A = np.zeros((6, 6))
    A[:4, :4] = np.eye(4)
    np.testing.assert_array_equal(model.system.A, A)


# candidates -------------------------------------------------------------------------------

def test_voltage_candidate_is_a_selector(bus3):
    cand = next(c for c in bus3.candidates if c.id == "V_1")
    expected = np.zeros((2, bus3.system.n))
    expected[0, 8] = expected[1, 9] = 1.0
    np.testing.assert_array_equal(cand.C, expected)


def test_pure_reactance_branch_current():
    case = two_bus()
    C = branch_current_row(case, "1", "2", 0, 4)
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(C[:, :2], rot)
    np.testing.assert_array_equal(C[:, 2:], -rot)


def test_injected_current_candidate_is_admittance_row(bus11):
    Yr = build_admittance(bus11.case)
    nd = bus11.system.n_d
    for cand in bus11.candidates:
        if cand.kind.value == "NodeInjectedCurrent":
            k = bus11.case.bus_index(cand.id.split("_")[1])
            np.testing.assert_array_equal(cand.C[:, nd:], Yr[2 * k:2 * k + 2])
            np.testing.assert_array_equal(cand.C[:, :nd], 0.0)


@pytest.mark.parametrize("name", ["bus3", "bus11"])
def test_branch_currents_sum_to_injection(name):
    case = load_case(name)
    n_d = 4 * len(case.generators)
    n = n_d + 2 * len(case.buses)
    Yr = build_admittance(case)
    for bus in case.buses:
        k = case.bus_index(bus.id)
        total = np.zeros((2, n))
        for br in case.branches:
            if bus.id in (br.from_bus, br.to_bus):
                other = br.to_bus if br.from_bus == bus.id else br.from_bus
                total += branch_current_row(case, bus.id, other, n_d, n)
        for ld in case.loads:
            if ld.bus == bus.id:
                y = load_admittance(case, ld)
                total[:, n_d + 2 * k:n_d + 2 * k + 2] += [[y.real, -y.imag], [y.imag, y.real]]
        inj = injected_current_row(case, bus.id, n_d, n, Yr)
        assert np.abs(total - inj).max() <= 1e-12 * max(1.0, np.abs(inj).max())


def test_candidates_need_voltage_coordinates(bus3):
    cur, _ = bus3.in_coordinates("currents")
    with pytest.raises(ModelError):
        build_candidates(bus3.case, cur)


# case files -------------------------------------------------------------------------------

def _bus3_raw():
    return json.loads(open(load_case("bus3").source).read())


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d["branches"][0].update({"to": "9"}), "unknown bus"),
    (lambda d: d["generators"][0].update({"bus": "3"}), "boundary"),
    (lambda d: d.update({"step_size": 0}), "step_size|0"),
    (lambda d: d["generators"][0].update({"H": -1.0}), "H|-1"),
    (lambda d: d["process_noise"]["algebraic"].pop("2"), "algebraic noise"),
    (lambda d: d["candidates"].append({"kind": "BranchCurrent", "from": "1", "to": "3", "R": [1, 1]}),
     "no branch"),
    (lambda d: d["candidates"].append(dict(d["candidates"][0])), "duplicate candidate"),
    (lambda d: d.update({"schema_version": 2}), "schema_version|2"),
])
def test_invalid_cases_are_rejected(mutate, message):
    raw = _bus3_raw()
    mutate(raw)
    with pytest.raises(ModelError, match=message):
        parse_case(raw)


def test_errors_carry_line_numbers(tmp_path):
    raw = _bus3_raw()
    raw["branches"][1]["r"] = -1.0
    text = json.dumps(raw, indent=1)
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises(ModelError) as info:
        load_case(path)
    line = next(i for i, row in enumerate(text.splitlines(), 1) if '"r": -1.0' in row)
    assert f"bad.json:{line}" in str(info.value)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema_version": 1,\n  oops\n}')
    with pytest.raises(ModelError, match=r"broken.json:3"):
        load_case(path)


def test_missing_case_file():
    with pytest.raises(ModelError, match="not found"):
        load_case("/nonexistent/case.json")


def test_inconsistent_operating_point_is_rejected():
    raw = _bus3_raw()
    raw["operating_point"]["voltages"]["2"][1] += 0.05
    with pytest.raises(ModelError):
        build_model(parse_case(raw))


def test_builtin_names_resolve():
    assert load_case("bus3").name == "bus3"
    assert load_case("bus11.json").name == "bus11"
