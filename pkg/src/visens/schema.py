"""JSON schemas for experiment configs and reports."""

SCHEMA_VERSION = "1.0"

_vector = {"type": "array", "items": {"type": "number"}}
_matrix = {"type": "array", "items": _vector}

_nonsmooth = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["indicator_box", "indicator_polyhedron", "one_norm_scaled",
                          "indicator_pointwise_ball", "indicator_halfspace_complement_ball"]},
        "lower": _vector, "upper": _vector, "G": _matrix, "h": _vector,
        "feasible_point": _vector, "weights": _vector, "D": _matrix,
        "cells": {"type": "integer", "minimum": 1}, "radius": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_generic_instance = {
    "type": "object",
    "properties": {
        "operator": {
            "type": "object",
            "properties": {"kind": {"const": "affine"}, "M": _matrix, "N": _matrix,
                           "offset": _vector},
            "required": ["kind", "M"],
            "additionalProperties": False,
        },
        "nonsmooth": _nonsmooth,
        "generator": {
            "type": "object",
            "properties": {"seed": {"type": "integer"},
                           "dim": {"type": "integer", "minimum": 2, "maximum": 10},
                           "kind": {"enum": ["box", "polyhedron", "one_norm"]},
                           "symmetric": {"type": "boolean"}, "cubic": {"type": "boolean"}},
            "required": ["seed"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_plasticity_instance = {
    "type": "object",
    "properties": {
        "D": _matrix, "A": _matrix, "B": _matrix, "weights": _vector,
        "cells": {"type": "integer", "minimum": 1},
        "random": {
            "type": "object",
            "properties": {"seed": {"type": "integer"}, "cells": {"type": "integer", "minimum": 1},
                           "m": {"type": "integer", "minimum": 1},
                           "n": {"type": "integer", "minimum": 1}},
            "required": ["seed"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_proxreg_instance = {
    "type": "object",
    "properties": {
        "set": {
            "type": "object",
            "properties": {"kind": {"const": "ball_complement"},
                           "radius": {"type": "number", "exclusiveMinimum": 0},
                           "dim": {"type": "integer", "minimum": 1}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "rho": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["set", "rho"],
    "additionalProperties": False,
}

_bangbang_instance = {
    "type": "object",
    "properties": {
        "template": {"type": "string"},
        "grid_n": {"type": "integer", "minimum": 8},
        "f": {
            "type": "object",
            "properties": {"kind": {"enum": ["zero", "linear", "cubic"]},
                           "coef": {"type": "number", "minimum": 0}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "L": {
            "type": "object",
            "properties": {"kind": {"const": "tracking"}, "weight": {"type": "number"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "manufactured": {
            "type": "object",
            "properties": {"frequency": {"type": "integer", "minimum": 2},
                           "amplitude": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_ray = {
    "type": "object",
    "properties": {
        "id": {"type": "string"},
        "p0": _vector,
        "q": _vector,
        "direction_seed": {"type": "integer"},
        "t_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                   "minItems": 2},
        "expected_derivative": _vector,
    },
    "required": ["id"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "application": {"enum": ["generic_vi", "plasticity", "proxreg", "bangbang"]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "instance": {"type": "object"},
        "rays": {"type": "array", "items": _ray, "minItems": 1},
        "tolerances": {
            "type": "object",
            "properties": {"solver": {"type": "number", "exclusiveMinimum": 0},
                           "convergence": {"type": "number", "exclusiveMinimum": 0},
                           "soq": {"type": "number", "exclusiveMinimum": 0},
                           "expected": {"type": "number", "exclusiveMinimum": 0},
                           "samples": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"report": {"type": "string"}, "csv_prefix": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["application", "seed", "instance", "rays"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"application": {"const": app}}},
         "then": {"properties": {"instance": schema}}}
        for app, schema in (("generic_vi", _generic_instance),
                            ("plasticity", _plasticity_instance),
                            ("proxreg", _proxreg_instance),
                            ("bangbang", _bangbang_instance))
    ],
}

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"type": "string"},
        "application": {"type": "string"},
        "seed": {"type": "integer"},
        "passed": {"type": "boolean"},
        "rays": {"type": "array", "items": {"type": "object",
                                            "required": ["id", "passed"]}},
    },
    "required": ["schema_version", "command", "passed"],
}

CSV_COLUMNS = ("t", "error", "soq", "lipschitz_ratio", "quadform_gap")
