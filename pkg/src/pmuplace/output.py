"""CSV and JSON rendering of experiment records, with the JSON output schema."""

from __future__ import annotations

import csv
import io
import json
import math

import jsonschema

_NUMBER_OR_INF = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
_IDS = {"type": "array", "items": {"type": "string"}}
_FLAGS = {"type": "array", "items": {"type": "string"}}

_SOLUTION = {
    "method": {"enum": ["bnb", "greedy-in", "greedy-out", "exhaustive"]},
    "budget": {"type": "number"},
    "selected": _IDS,
    "objective": _NUMBER_OR_INF,
    "gap": {"oneOf": [_NUMBER_OR_INF, {"type": "null"}]},
    "flags": _FLAGS,
    "wall_time": {"type": "number"},
}
_SOLUTION_REQUIRED = ["method", "budget", "selected", "objective", "gap", "flags"]


def _array_of(properties, required):
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "array",
        "items": {"type": "object", "properties": properties, "required": required,
                  "additionalProperties": False},
    }


OUTPUT_SCHEMAS = {
    "solve": _array_of(_SOLUTION, _SOLUTION_REQUIRED),
    "budget-sweep": _array_of(_SOLUTION, _SOLUTION_REQUIRED),
    "noise-sweep": _array_of(
        {**_SOLUTION, "scale": {"type": "number", "exclusiveMinimum": 0},
         "rows": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
        ["scale", "rows"] + _SOLUTION_REQUIRED),
    "condition-compare": _array_of(
        {"count": {"type": "integer", "minimum": 1},
         "coords": {"enum": ["voltages", "currents"]},
         "mean_condition": _NUMBER_OR_INF,
         "samples": {"type": "integer", "minimum": 0},
         "attempts": {"type": "integer", "minimum": 0},
         "flag": {"type": "string"}},
        ["count", "coords", "mean_condition", "samples", "attempts", "flag"]),
    "certify": _array_of(
        {**_SOLUTION,
         "fixed_point_residual": _NUMBER_OR_INF,
         "schur_pair_min_eig": _NUMBER_OR_INF,
         "theta_min_eig": _NUMBER_OR_INF,
         "passed": {"type": "boolean"}},
        _SOLUTION_REQUIRED),
}


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else _json_value(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return str(v)


def columns(records) -> list:
    cols = []
    for rec in records:
        for k in rec:
            if k not in cols:
                cols.append(k)
    return cols


def to_json(records, command) -> str:
    doc = [{k: _json_value(v) for k, v in rec.items()} for rec in records]
    jsonschema.validate(doc, OUTPUT_SCHEMAS[command])
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def to_csv(records) -> str:
    buf = io.StringIO()
    cols = columns(records)
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(cols)
    for rec in records:
        writer.writerow([_csv_value(rec.get(c)) for c in cols])
    return buf.getvalue()


def render(records, command, fmt) -> str:
    if fmt == "json":
        return to_json(records, command)
    if fmt == "csv":
        return to_csv(records)
    raise ValueError(f"unknown format {fmt!r}")


def parse_json(text, command) -> list:
    """Load a JSON result file and check it against the output schema."""
    doc = json.loads(text)
    jsonschema.validate(doc, OUTPUT_SCHEMAS[command])
    return doc
