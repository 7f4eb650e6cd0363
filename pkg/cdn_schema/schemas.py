"""
JSON Schemas for model files and learned-model output.

Model files are checked here first (shape, types, unknown keys); the model
validator then checks structure and parameter domains.
"""

import jsonschema

from cdn.services.errors import InvalidSpec

NORMAL_MARGIN_SCHEMA = {
    "type": "object",
    "properties": {
        "type": {"const": "normal"},
        "mu": {"type": "number"},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["type", "mu", "sigma"],
    "additionalProperties": False,
}

DISCRETE_MARGIN_SCHEMA = {
    "type": "object",
    "properties": {
        "type": {"const": "discrete"},
        "support_min": {"type": "integer"},
        "pmf": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    },
    "required": ["type", "support_min", "pmf"],
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "variables": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "margin": {"oneOf": [NORMAL_MARGIN_SCHEMA, DISCRETE_MARGIN_SCHEMA]},
                },
                "required": ["name", "margin"],
                "additionalProperties": False,
            },
        },
        "factors": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["clayton", "normal_pair"]},
                    "param": {"type": "number"},
                    "scope": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                },
                "required": ["kind", "param", "scope"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["variables", "factors"],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "method": {"enum": ["gd", "lbfgs-restart", "lbfgs-barrier", "piecewise"]},
        "energy": {"type": ["number", "null"]},
        "iterations": {"type": "integer", "minimum": 0},
        "restarts": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "reason": {"type": "string"},
        "energy_trace": {"type": "array", "items": {"type": ["number", "null"]}},
        "version": {"type": "string"},
    },
    "required": ["method", "energy", "iterations", "restarts", "converged"],
    "additionalProperties": False,
}

LEARNED_MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        **MODEL_SCHEMA["properties"],
        "report": REPORT_SCHEMA,
    },
    "required": ["variables", "factors", "report"],
    "additionalProperties": False,
}


def check_schema(data, schema):
    """Raise InvalidSpec naming the first failing path."""
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        path = '/'.join(str(p) for p in exc.absolute_path) or '<root>'
        raise InvalidSpec(f'{path}: {exc.message}') from exc
