"""JSON experiment descriptions: schema, validation and construction of spaces and subsets.

A description names a command, a space, the subset C (or A, B, subgroups...)
and the parameter grids.  It is validated against :data:`SCHEMA` before
anything is built; unknown keys are rejected and errors carry a JSON pointer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .coarse_space import EPS, CoordinateSpace, MatrixSpace, ProductRowSpace, TruncationRule, thicken
from .errors import ConfigurationError, SchemaError
from .filtered_ends import EndsConfig
from .group_models import (
    DEFAULT_CAP,
    CosetTable,
    SubsetSpec,
    model_from_description,
    trace_subset,
)
from .pair_geometry import ball_space, cached_ball

COMMANDS = ["filtered-ends", "ends", "pair-check", "stabilizer", "hausdorff", "commensurator"]

_num = {"type": "number"}
_int = {"type": "integer"}
_vec = {"type": "array", "items": _num}
_element = {"oneOf": [{"type": "string"}, {"type": "integer"}, {"type": "array"}]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["space"],
    "properties": {
        "id": {"type": "string"},
        "title": {"type": "string"},
        "command": {"enum": COMMANDS},
        "space": {"$ref": "#/$defs/space"},
        "target": {"$ref": "#/$defs/space"},
        "subset": {"$ref": "#/$defs/subset"},
        "A": {"$ref": "#/$defs/subset"},
        "B": {"$ref": "#/$defs/subset"},
        "target_subset": {"$ref": "#/$defs/subset"},
        "map": {"$ref": "#/$defs/map"},
        "pair": {"enum": ["qi", "finite-index"]},
        "subgroups": {"type": "array", "items": {"$ref": "#/$defs/generators"}},
        "target_subgroups": {"type": "array", "items": {"$ref": "#/$defs/generators"}},
        "finite_index": {"$ref": "#/$defs/table"},
        "elements": {"type": "array", "items": _element},
        "ends": {"type": "boolean"},
        "window": {"enum": ["half", "none"]},
        "grids": {"$ref": "#/$defs/grids"},
    },
    "$defs": {
        "generators": {"type": "array", "items": _element},
        "group": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["free-abelian", "free", "direct-product", "free-product"]},
                "rank": {"type": "integer", "minimum": 1},
                "generators": {"type": "array", "items": {"type": "array", "items": _int}},
                "factors": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/group"}},
            },
        },
        "line": {
            "type": "object",
            "additionalProperties": False,
            "required": ["point", "direction"],
            "properties": {
                "point": _vec,
                "direction": _vec,
                "repeat": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["offset", "from", "to"],
                    "properties": {"offset": _vec, "from": _int, "to": _int},
                },
            },
        },
        "space": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["cayley", "sampled-lines", "product-row", "explicit"]},
                "group": {"$ref": "#/$defs/group"},
                "R": {"type": "number", "minimum": 0},
                "lines": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/line"}},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "extent": {"type": "number", "exclusiveMinimum": 0},
                "metric": {"enum": ["euclidean", "manhattan"]},
                "basepoint": {"oneOf": [_vec, _int]},
                "m": {"type": "integer", "minimum": 2},
                "coordinates": {"type": "array", "items": _vec},
                "distances": {"type": "array", "items": _vec},
            },
            "allOf": [
                {"if": {"properties": {"kind": {"const": "cayley"}}},
                 "then": {"required": ["group", "R"]}},
                {"if": {"properties": {"kind": {"const": "sampled-lines"}}},
                 "then": {"required": ["lines", "step", "R"]}},
                {"if": {"properties": {"kind": {"const": "product-row"}}},
                 "then": {"required": ["m", "step", "R"]}},
                {"if": {"properties": {"kind": {"const": "explicit"}}},
                 "then": {"oneOf": [{"required": ["coordinates"]}, {"required": ["distances"]}]}},
            ],
        },
        "subset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["subgroup", "coset", "basepoint", "explicit", "predicate", "line", "empty"]},
                "generators": {"$ref": "#/$defs/generators"},
                "element": _element,
                "points": {"type": "array"},
                "name": {"type": "string"},
                "point": _vec,
                "direction": _vec,
                "thicken": {"type": "number", "minimum": 0},
            },
            "allOf": [
                {"if": {"properties": {"kind": {"const": "coset"}}},
                 "then": {"required": ["element", "generators"]}},
                {"if": {"properties": {"kind": {"const": "subgroup"}}},
                 "then": {"required": ["generators"]}},
                {"if": {"properties": {"kind": {"const": "explicit"}}},
                 "then": {"required": ["points"]}},
                {"if": {"properties": {"kind": {"const": "predicate"}}},
                 "then": {"required": ["name"]}},
                {"if": {"properties": {"kind": {"const": "line"}}},
                 "then": {"required": ["point", "direction"]}},
            ],
        },
        "map": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["identity", "set-identity", "swap", "translation"]},
                "element": _element,
            },
        },
        "table": {
            "type": "object",
            "additionalProperties": False,
            "required": ["index", "actions"],
            "properties": {
                "index": {"type": "integer", "minimum": 1},
                "actions": {"type": "array", "items": {"type": "array", "items": _int}},
            },
        },
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
                "target_sigma": {"type": "array", "minItems": 1,
                                 "items": {"type": "number", "exclusiveMinimum": 0}},
                "mu": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                "target_mu": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                "R": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
                "M": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
                "W": {"type": "integer", "minimum": 1},
                "N_max": {"type": "integer", "minimum": 1},
                "margin": {"type": ["number", "null"], "minimum": 0},
                "depth": {"type": ["number", "null"], "minimum": 0},
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _pointer(path):
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return "/" + "/".join(parts)


def validate(doc):
    """Validate a description; raises :class:`SchemaError` with the JSON pointer of the first problem."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(err.message, _pointer(err.absolute_path))
    return doc


def load(source):
    """Read and validate a description from a path, a JSON string or a dict."""
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read {source}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg} at line {exc.lineno}", "/") from None
    return validate(doc)


###############################################################################
#                               construction                                  #
###############################################################################


@dataclass(eq=False)
class BuiltSpace:
    space: object
    model: object = None
    ball: object = None
    kind: str = ""


def _sample_lines(desc):
    step = float(desc["step"])
    extent = float(desc.get("extent", desc["R"]))
    k = int(math.floor(extent / step + EPS))
    t = np.arange(-k, k + 1) * step
    chunks = []
    for line in desc["lines"]:
        direction = np.asarray(line["direction"], dtype=float)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ConfigurationError("line direction must be non-zero")
        direction = direction / norm
        point = np.asarray(line["point"], dtype=float)
        if direction.shape != point.shape:
            raise ConfigurationError("line point and direction differ in dimension")
        rep = line.get("repeat")
        shifts = [0] if rep is None else range(rep["from"], rep["to"] + 1)
        offset = np.zeros_like(point) if rep is None else np.asarray(rep["offset"], dtype=float)
        for s in shifts:
            chunks.append(point + s * offset + t[:, None] * direction[None, :])
    return np.vstack(chunks)


def build_space(desc, cap=DEFAULT_CAP, name=""):
    """Construct the finite space of a ``space`` block."""
    kind = desc["kind"]
    if kind == "cayley":
        model = model_from_description(desc["group"])
        R = desc["R"]
        if not float(R).is_integer():
            raise ConfigurationError("Cayley ball radius must be an integer")
        ball = cached_ball(model, int(R), cap)
        space = ball_space(ball)
        return BuiltSpace(space, model, ball, kind)
    if kind == "sampled-lines":
        pts = _sample_lines(desc)
        base = desc.get("basepoint", [0.0] * pts.shape[1])
        space = CoordinateSpace(pts, desc["R"], base, desc.get("metric", "euclidean"), desc["step"], name)
        return BuiltSpace(space, kind=kind)
    if kind == "product-row":
        return BuiltSpace(ProductRowSpace(desc["m"], desc["step"], desc["R"], name), kind=kind)
    if kind == "explicit":
        base = desc.get("basepoint", 0)
        if "coordinates" in desc:
            coords = np.asarray(desc["coordinates"], dtype=float)
            if isinstance(base, int):
                base = coords[base]
            R = desc.get("R")
            if R is None:
                R = float(np.abs(coords - np.asarray(base)).sum(axis=1).max()) if desc.get("metric") == "manhattan" \
                    else float(np.linalg.norm(coords - np.asarray(base), axis=1).max())
            space = CoordinateSpace(coords, R, base, desc.get("metric", "euclidean"), desc.get("step", 1.0), name)
            space.validate()
            return BuiltSpace(space, kind=kind)
        if not isinstance(base, int):
            raise ConfigurationError("an explicit distance table needs an integer basepoint")
        space = MatrixSpace(desc["distances"], desc.get("R"), base, desc.get("step", 1.0), name=name)
        space.validate()
        return BuiltSpace(space, kind=kind)
    raise ConfigurationError(f"unknown space kind {kind!r}")


def parse_element(model, desc):
    if model is None:
        raise ConfigurationError("group elements need a Cayley space")
    return model.parse(desc)


def subset_spec(model, desc):
    """The :class:`SubsetSpec` of a group subset block."""
    kind = desc["kind"]
    gens = tuple(parse_element(model, g) for g in desc.get("generators", []))
    if kind == "subgroup":
        return SubsetSpec("subgroup", gens)
    if kind == "coset":
        return SubsetSpec("coset", gens, element=parse_element(model, desc["element"]))
    if kind == "basepoint":
        return SubsetSpec("basepoint")
    if kind == "explicit":
        return SubsetSpec("explicit", points=tuple(parse_element(model, p) for p in desc["points"]))
    if kind == "predicate":
        return SubsetSpec("predicate", name=desc["name"])
    raise ConfigurationError(f"subset kind {kind!r} does not apply to Cayley spaces")


def build_subset(built, desc):
    """Point indices of a subset block inside a built space (thickened if requested)."""
    space = built.space
    kind = desc["kind"]
    if kind == "empty":
        pts = np.zeros(0, dtype=np.int64)
    elif built.ball is not None:
        pts = trace_subset(built.ball, subset_spec(built.model, desc))
    elif kind == "basepoint":
        pts = np.asarray([space.basepoint], dtype=np.int64)
    elif kind == "explicit":
        pts = []
        for p in desc["points"]:
            if isinstance(p, int) and not isinstance(space, CoordinateSpace):
                if not 0 <= p < space.n:
                    raise ConfigurationError(f"point index {p} outside the space")
                pts.append(p)
            elif isinstance(space, CoordinateSpace):
                pts.append(space.find(p))
            else:
                raise ConfigurationError(f"cannot resolve point {p!r}")
        pts = np.unique(np.asarray(pts, dtype=np.int64))
    elif kind == "line":
        coords = getattr(space, "coords", None)
        if coords is None:
            coords = getattr(space, "rows", None)
        if coords is None:
            raise ConfigurationError("line subsets need a coordinate space")
        point = np.asarray(desc["point"], dtype=float)
        direction = np.asarray(desc["direction"], dtype=float)
        direction = direction / np.linalg.norm(direction)
        rel = coords - point
        resid = rel - (rel @ direction)[:, None] * direction[None, :]
        pts = np.flatnonzero(np.linalg.norm(resid, axis=1) <= 1e-7)
    elif kind == "predicate":
        raise ConfigurationError(f"unknown predicate {desc['name']!r} for a sampled space")
    else:
        raise ConfigurationError(f"subset kind {kind!r} needs a Cayley space")
    r = desc.get("thicken", 0)
    if r:
        pts = thicken(space, pts, r)
    return pts


def finite_index_spec(model, desc):
    return SubsetSpec("finite-index", table=CosetTable(model, desc["index"], desc["actions"]))


def ends_config(desc):
    g = desc.get("grids", {})
    rule = TruncationRule(margin=g.get("margin"), depth=g.get("depth"))
    return EndsConfig(window=g.get("W", 3), n_max=g.get("N_max", 64), rule=rule)
