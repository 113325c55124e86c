"""JSON network files: schema validation, parsing and emission."""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path
from typing import Union

import jsonschema

from .conductance import MODEL_TYPES, ConductanceModel
from .errors import DuplicateEdgeModel, SchemaError
from .network import NetworkModel

_NUM_OR_NAME = {"oneOf": [{"type": "number"}, {"type": "string", "minLength": 1}]}

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["nodes", "terminals", "edges"],
    "additionalProperties": False,
    "properties": {
        "nodes": {"type": "integer", "minimum": 2},
        "terminals": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"type": "integer", "minimum": 1},
        },
        "edges": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["from", "to", "model"],
                "additionalProperties": False,
                "properties": {
                    "from": {"type": "integer", "minimum": 1},
                    "to": {"type": "integer", "minimum": 1},
                    "model": {
                        "oneOf": [
                            {"type": "object", "additionalProperties": False,
                             "required": ["type", "resistance"],
                             "properties": {"type": {"const": "linear"},
                                            "resistance": _NUM_OR_NAME}},
                            {"type": "object", "additionalProperties": False,
                             "required": ["type", "gain", "beta"],
                             "properties": {"type": {"const": "tanh_negative"},
                                            "gain": _NUM_OR_NAME, "beta": _NUM_OR_NAME}},
                            {"type": "object", "additionalProperties": False,
                             "required": ["type", "gain", "cubic"],
                             "properties": {"type": {"const": "cubic_negative"},
                                            "gain": _NUM_OR_NAME, "cubic": _NUM_OR_NAME}},
                        ]
                    },
                },
            },
        },
        "parameters": {"type": "object", "additionalProperties": {"type": "number"}},
        "labels": {"type": "array", "items": {"type": "integer"}},
    },
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _no_duplicate_keys(pairs):
    seen = {}
    for key, val in pairs:
        if key in seen:
            if key == "model":
                raise DuplicateEdgeModel("", "edge declares more than one model")
            raise SchemaError("", f"duplicate key {key!r}")
        seen[key] = val
    return seen


def _best_error(doc):
    errors = sorted(jsonschema.Draft202012Validator(NETWORK_SCHEMA).iter_errors(doc),
                    key=lambda e: (-len(e.absolute_path), str(e.absolute_path)))
    if not errors:
        return None
    err = jsonschema.exceptions.best_match(errors)
    if err.validator == "oneOf" and "model" in err.absolute_path:
        kind = err.instance.get("type") if isinstance(err.instance, dict) else None
        if kind not in MODEL_TYPES:
            return SchemaError(_pointer(err.absolute_path),
                               f"unknown model type {kind!r}; expected one of {sorted(MODEL_TYPES)}")
        return SchemaError(_pointer(err.absolute_path),
                           f"invalid {kind} model fields: {sorted(err.instance)}")
    if err.validator == "uniqueItems":
        return SchemaError(_pointer(err.absolute_path), f"duplicate entries in {err.instance}")
    return SchemaError(_pointer(err.absolute_path), err.message)


def network_from_dict(doc) -> NetworkModel:
    err = _best_error(doc)
    if err is not None:
        raise err
    n = doc["nodes"]
    for idx, t in enumerate(doc["terminals"]):
        if t > n:
            raise SchemaError(f"/terminals/{idx}", f"terminal {t} exceeds node count {n}")
    params = dict(doc.get("parameters", {}))
    edges, models = [], []
    for idx, e in enumerate(doc["edges"]):
        for key in ("from", "to"):
            if e[key] > n:
                raise SchemaError(f"/edges/{idx}/{key}", f"node {e[key]} exceeds node count {n}")
        if e["from"] == e["to"]:
            raise SchemaError(f"/edges/{idx}", "self-loop")
        spec = dict(e["model"])
        cls = MODEL_TYPES[spec.pop("type")]
        for key, val in spec.items():
            if isinstance(val, str) and val not in params:
                raise SchemaError(f"/edges/{idx}/model/{key}", f"undefined parameter {val!r}")
        try:
            models.append(cls(**spec))
        except ValueError as exc:
            raise SchemaError(f"/edges/{idx}/model", str(exc)) from None
        edges.append((e["from"] - 1, e["to"] - 1))
    try:
        return NetworkModel(n_nodes=n, edges=tuple(edges), models=tuple(models),
                            terminals=tuple(t - 1 for t in doc["terminals"]),
                            parameters=params)
    except ValueError as exc:
        raise SchemaError("", str(exc)) from None


def parse_network(source: Union[str, os.PathLike]) -> NetworkModel:
    """Parse a network from a path or from JSON text.

    Strings starting with ``{`` are treated as JSON text.
    """
    if isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        text = Path(source).read_text()
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return network_from_dict(doc)


def network_to_dict(net: NetworkModel) -> dict:
    doc = {
        "nodes": net.n_nodes,
        "terminals": [t + 1 for t in net.terminals],
        "edges": [{"from": t + 1, "to": h + 1, "model": m.to_dict()}
                  for (t, h), m in zip(net.edges, net.models)],
    }
    if net.parameters:
        doc["parameters"] = dict(net.parameters)
    return doc


def emit_network(net: NetworkModel) -> str:
    return json.dumps(network_to_dict(net), indent=2)


def bundled_path(name: str = "fig1.json") -> Path:
    return Path(str(resources.files("netsing") / "data" / name))


def load_fig1() -> NetworkModel:
    return parse_network(bundled_path("fig1.json"))


def model_from_dict(spec: dict) -> ConductanceModel:
    spec = dict(spec)
    return MODEL_TYPES[spec.pop("type")](**spec)


# --- bifurcation diagrams ------------------------------------------------

def diagram_to_csv(diagram, n_nodes: int) -> str:
    """One row per sample: ``branch,lambda,x,stable,z1..zn`` with 12 significant digits."""
    fmt = "{:.12g}".format
    header = ["branch", "lambda", "x", "stable"] + [f"z{i + 1}" for i in range(n_nodes)]
    lines = [",".join(header)]
    for br in sorted(diagram.branches, key=lambda b: b.id):
        for s in br.samples:
            stable = "" if s.stable is None else str(int(s.stable))
            row = [str(br.id), fmt(s.lam), fmt(s.x), stable] + [fmt(v) for v in s.z]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def diagram_to_dict(diagram) -> dict:
    return {
        "branches": [{"id": b.id, "n_samples": len(b.samples), "endpoints": list(b.endpoints),
                      "lambda_min": min(s.lam for s in b.samples),
                      "lambda_max": max(s.lam for s in b.samples)}
                     for b in diagram.branches],
        "special_points": [p.to_dict() for p in diagram.special_points],
    }
