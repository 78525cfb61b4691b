"""Case-file schema and loading.

A case file is a JSON document describing the modeled part of the grid, the
operating point, discrete-time process noise and the PMU candidates.  All
electrical quantities are per unit; time constants and the step size are in
seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
from json_source_map import calculate as source_map

from ..errors import ModelError

SCHEMA_VERSION = 1
DEFAULT_OMEGA_BASE = 2.0 * math.pi * 60.0

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_num = {"type": "number"}
_id = {"type": "string", "minLength": 1}

CASE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "step_size", "buses", "branches", "generators",
                 "operating_point", "process_noise", "candidates"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "note": {"type": "string"},
        "step_size": _pos,
        "omega_base": _pos,
        "buses": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["id"], "additionalProperties": False,
                "properties": {"id": _id, "is_boundary": {"type": "boolean"}},
            },
        },
        "branches": {
            "type": "array",
            "items": {
                "type": "object", "required": ["from", "to", "r", "x"], "additionalProperties": False,
                "properties": {"from": _id, "to": _id, "r": _nonneg, "x": _num, "b": _num},
            },
        },
        "loads": {
            "type": "array",
            "items": {
                "type": "object", "required": ["bus", "p", "q"], "additionalProperties": False,
                "properties": {"bus": _id, "p": _num, "q": _num},
            },
        },
        "generators": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "bus", "H", "D", "xd", "xd_prime", "xq", "xq_prime",
                             "Td0_prime", "Tq0_prime"],
                "additionalProperties": False,
                "properties": {
                    "id": _id, "bus": _id, "H": _pos, "D": _nonneg,
                    "xd": _pos, "xd_prime": _pos, "xq": _pos, "xq_prime": _pos,
                    "ra": _nonneg, "Td0_prime": _pos, "Tq0_prime": _pos,
                },
            },
        },
        "operating_point": {
            "type": "object", "required": ["voltages"], "additionalProperties": False,
            "properties": {
                "voltages": {
                    "type": "object",
                    "additionalProperties": {"type": "array", "prefixItems": [_pos, _num],
                                             "minItems": 2, "maxItems": 2},
                },
                "generators": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object", "additionalProperties": False,
                        "properties": {"Pm": _num, "Ef": _num},
                    },
                },
            },
        },
        "process_noise": {
            "type": "object", "required": ["differential", "algebraic"], "additionalProperties": False,
            "properties": {
                "differential": {"type": "object", "additionalProperties": {
                    "type": "array", "items": _pos, "minItems": 4, "maxItems": 4}},
                "algebraic": {"type": "object", "additionalProperties": {
                    "type": "array", "items": _pos, "minItems": 2, "maxItems": 2}},
            },
        },
        "candidates": {
            "type": "array",
            "items": {
                "type": "object", "required": ["kind", "R"], "additionalProperties": False,
                "properties": {
                    "id": _id,
                    "kind": {"enum": ["NodeVoltage", "BranchCurrent", "NodeInjectedCurrent"]},
                    "bus": _id, "from": _id, "to": _id,
                    "R": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                    "cost": _nonneg,
                },
            },
        },
    },
}


@dataclass(frozen=True)
class Bus:
    id: str
    is_boundary: bool = False


@dataclass(frozen=True)
class Branch:
    from_bus: str
    to_bus: str
    r: float
    x: float
    b: float = 0.0

    @property
    def series_admittance(self) -> complex:
        z = complex(self.r, self.x)
        if z == 0:
            raise ModelError(f"branch {self.from_bus}-{self.to_bus} has zero impedance")
        return 1.0 / z


@dataclass(frozen=True)
class Load:
    bus: str
    p: float
    q: float


@dataclass(frozen=True)
class GeneratorData:
    id: str
    bus: str
    H: float
    D: float
    xd: float
    xd_prime: float
    xq: float
    xq_prime: float
    ra: float
    Td0_prime: float
    Tq0_prime: float
    Pm: float | None = None
    Ef: float | None = None


@dataclass(frozen=True)
class CandidateSpec:
    id: str
    kind: str
    R: tuple
    cost: float = 1.0
    bus: str | None = None
    from_bus: str | None = None
    to_bus: str | None = None


@dataclass
class CaseDefinition:
    """Parsed, cross-checked case file."""

    buses: list
    branches: list
    loads: list
    generators: list
    voltages: dict            # bus id -> complex operating voltage
    step_size: float
    noise_differential: dict  # generator id -> 4 diagonal entries
    noise_algebraic: dict     # bus id -> 2 diagonal entries
    candidates: list
    omega_base: float = DEFAULT_OMEGA_BASE
    name: str = ""
    note: str = ""
    source: str = field(default="", repr=False)

    @property
    def bus_ids(self) -> list:
        return [b.id for b in self.buses]

    @property
    def retained_buses(self) -> list:
        return [b.id for b in self.buses if not b.is_boundary]

    def bus_index(self, bus_id) -> int:
        try:
            return self.bus_ids.index(bus_id)
        except ValueError:
            raise ModelError(f"unknown bus {bus_id!r}") from None

    def find_branch(self, a, b) -> Branch:
        for br in self.branches:
            if (br.from_bus, br.to_bus) in ((a, b), (b, a)):
                return br
        raise ModelError(f"no branch between buses {a!r} and {b!r}")


def _default_candidate_id(spec) -> str:
    kind = spec["kind"]
    if kind == "NodeVoltage":
        return f"V_{spec.get('bus')}"
    if kind == "NodeInjectedCurrent":
        return f"Iinj_{spec.get('bus')}"
    return f"I_{spec.get('from')}-{spec.get('to')}"


def _line_of(text, path):
    if text is None:
        return None
    try:
        entries = source_map(text)
    except Exception:
        return None
    pointer = "".join(f"/{p}" for p in path)
    while True:
        if pointer in entries:
            entry = entries[pointer]
            loc = entry.key_start or entry.value_start
            return loc.line + 1
        if not pointer:
            return None
        pointer = pointer.rsplit("/", 1)[0]


def _fail(source, text, path, message):
    line = _line_of(text, path)
    where = source or "<case>"
    if line is not None:
        where = f"{where}:{line}"
    loc = "/".join(str(p) for p in path)
    raise ModelError(f"{where}: {message}" + (f" (at /{loc})" if loc else ""))


def parse_case(doc, *, text=None, source="") -> CaseDefinition:
    """Validate a decoded case document and build a :class:`CaseDefinition`.

    ``text`` is the raw JSON, used only to attach line numbers to errors.
    """
    validator = jsonschema.Draft202012Validator(CASE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        _fail(source, text, list(err.absolute_path), err.message)

    buses = [Bus(b["id"], bool(b.get("is_boundary", False))) for b in doc["buses"]]
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        _fail(source, text, ["buses"], "duplicate bus id")
    known = set(ids)

    branches = []
    for i, br in enumerate(doc["branches"]):
        for end in ("from", "to"):
            if br[end] not in known:
                _fail(source, text, ["branches", i, end], f"unknown bus {br[end]!r}")
        if br["from"] == br["to"]:
            _fail(source, text, ["branches", i], "branch connects a bus to itself")
        if br["r"] == 0 and br["x"] == 0:
            _fail(source, text, ["branches", i], "branch has zero impedance")
        branches.append(Branch(br["from"], br["to"], float(br["r"]), float(br["x"]), float(br.get("b", 0.0))))

    loads = []
    for i, ld in enumerate(doc.get("loads", [])):
        if ld["bus"] not in known:
            _fail(source, text, ["loads", i, "bus"], f"unknown bus {ld['bus']!r}")
        loads.append(Load(ld["bus"], float(ld["p"]), float(ld["q"])))

    boundary = {b.id for b in buses if b.is_boundary}
    op = doc["operating_point"]
    gen_op = op.get("generators", {})
    generators = []
    gen_buses = set()
    for i, g in enumerate(doc["generators"]):
        if g["bus"] not in known:
            _fail(source, text, ["generators", i, "bus"], f"unknown bus {g['bus']!r}")
        if g["bus"] in boundary:
            _fail(source, text, ["generators", i, "bus"], "generator placed on a boundary bus")
        if g["bus"] in gen_buses:
            _fail(source, text, ["generators", i, "bus"], "at most one generator per bus")
        gen_buses.add(g["bus"])
        extra = gen_op.get(g["id"], {})
        generators.append(GeneratorData(
            id=g["id"], bus=g["bus"], H=g["H"], D=g["D"], xd=g["xd"], xd_prime=g["xd_prime"],
            xq=g["xq"], xq_prime=g["xq_prime"], ra=g.get("ra", 0.0),
            Td0_prime=g["Td0_prime"], Tq0_prime=g["Tq0_prime"],
            Pm=extra.get("Pm"), Ef=extra.get("Ef")))
    gen_ids = [g.id for g in generators]
    if len(set(gen_ids)) != len(gen_ids):
        _fail(source, text, ["generators"], "duplicate generator id")
    for gid in gen_op:
        if gid not in gen_ids:
            _fail(source, text, ["operating_point", "generators", gid], f"unknown generator {gid!r}")

    voltages = {}
    for bid in ids:
        if bid not in op["voltages"]:
            _fail(source, text, ["operating_point", "voltages"], f"missing voltage for bus {bid!r}")
        mag, ang = op["voltages"][bid]
        voltages[bid] = mag * complex(math.cos(ang), math.sin(ang))
    for bid in op["voltages"]:
        if bid not in known:
            _fail(source, text, ["operating_point", "voltages", bid], f"unknown bus {bid!r}")

    noise = doc["process_noise"]
    if set(noise["differential"]) != set(gen_ids):
        _fail(source, text, ["process_noise", "differential"],
              "differential noise must list exactly the generators")
    retained = [b.id for b in buses if not b.is_boundary]
    if set(noise["algebraic"]) != set(retained):
        _fail(source, text, ["process_noise", "algebraic"],
              "algebraic noise must list exactly the non-boundary buses")

    candidates = []
    seen = set()
    for i, c in enumerate(doc["candidates"]):
        kind = c["kind"]
        if kind in ("NodeVoltage", "NodeInjectedCurrent"):
            if c.get("bus") not in known:
                _fail(source, text, ["candidates", i], f"candidate references unknown bus {c.get('bus')!r}")
        else:
            a, b = c.get("from"), c.get("to")
            if a not in known or b not in known:
                _fail(source, text, ["candidates", i], f"candidate references unknown bus in {a!r}-{b!r}")
            if not any((br.from_bus, br.to_bus) in ((a, b), (b, a)) for br in branches):
                _fail(source, text, ["candidates", i], f"no branch between {a!r} and {b!r}")
        cid = c.get("id") or _default_candidate_id(c)
        if cid in seen:
            _fail(source, text, ["candidates", i], f"duplicate candidate id {cid!r}")
        seen.add(cid)
        candidates.append(CandidateSpec(cid, kind, tuple(c["R"]), float(c.get("cost", 1.0)),
                                        bus=c.get("bus"), from_bus=c.get("from"), to_bus=c.get("to")))

    return CaseDefinition(
        buses=buses, branches=branches, loads=loads, generators=generators, voltages=voltages,
        step_size=float(doc["step_size"]),
        noise_differential={k: tuple(v) for k, v in noise["differential"].items()},
        noise_algebraic={k: tuple(v) for k, v in noise["algebraic"].items()},
        candidates=candidates, omega_base=float(doc.get("omega_base", DEFAULT_OMEGA_BASE)),
        name=doc.get("name", ""), note=doc.get("note", ""), source=source)


def builtin_case_path(name) -> Path:
    """Path of a shipped fixture (``"bus3"`` or ``"bus11"``)."""
    stem = name[:-5] if name.endswith(".json") else name
    path = resources.files("pmuplace") / "cases" / f"{stem}.json"
    return Path(str(path))


def load_case(path) -> CaseDefinition:
    """Read and validate a case file; shipped fixtures may be named directly."""
    p = Path(path)
    if not p.exists():
        candidate = builtin_case_path(str(path))
        if candidate.exists():
            p = candidate
        else:
            raise ModelError(f"case file not found: {path}")
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{p}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    return parse_case(doc, text=text, source=str(p))
