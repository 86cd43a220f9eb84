"""JSON Schemas for the documents the CLI writes."""

_prob = {"type": "number", "minimum": 0, "maximum": 1}
_params = {
    "type": "object",
    "required": ["alpha", "beta", "gamma"],
    "properties": {"alpha": _prob, "beta": _prob, "gamma": _prob},
}
_index_list = {"type": "array", "items": {"type": "integer", "minimum": 0}}
_boundary = {
    "type": "object",
    "required": ["fire_x", "fire_y"],
    "properties": {"fire_x": _index_list, "fire_y": _index_list},
}
_z_summary = {
    "type": "object",
    "required": ["n", "mean_z", "var_z", "quantiles", "extinct_frac"],
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "mean_z": _prob,
        "var_z": {"type": "number", "minimum": 0},
        "quantiles": {"type": "array", "items": _prob, "minItems": 5, "maxItems": 5},
        "extinct_frac": _prob,
    },
}

EXACT_SCHEMA = {
    "type": "object",
    "required": ["n", "ez", "pmf", "params", "boundary"],
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "ez": _prob,
        "pmf": {"type": "array", "items": _prob},
        "params": _params,
        "boundary": _boundary,
    },
}

STATS_SCHEMA = {
    "type": "object",
    "required": ["params", "boundary", "n_max", "replicas", "seed", "stats"],
    "properties": {
        "params": _params,
        "boundary": _boundary,
        "n_max": {"type": "integer", "minimum": 0},
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "stats": {"type": "array", "items": _z_summary},
    },
}

CONVERGENCE_SCHEMA = {
    "type": "object",
    "required": ["params", "boundary", "seed", "checkpoints", "epsilons", "replicas",
                 "per_checkpoint", "cauchy", "flags"],
    "properties": {
        "params": _params,
        "boundary": _boundary,
        "seed": {"type": "integer", "minimum": 0},
        "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "replicas": {"type": "integer", "minimum": 1},
        "per_checkpoint": {"type": "array", "items": _z_summary},
        "cauchy": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["m", "m_next", "fractions"],
                "properties": {
                    "m": {"type": "integer"},
                    "m_next": {"type": "integer"},
                    "fractions": {"type": "object", "additionalProperties": _prob},
                },
            },
        },
        "flags": {"type": "array", "items": {"type": "string"}},
    },
}

_num_map = {"type": "object", "additionalProperties": {"type": ["number", "null"]}}
ONED_SCHEMA = {
    "type": "object",
    "required": ["p", "replicas", "seed", "analytic", "empirical", "z_scores"],
    "properties": {
        "p": _prob,
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "analytic": {"type": "object", "required": ["mean", "var", "tails"]},
        "empirical": {"type": "object", "required": ["mean", "var", "tails"]},
        "z_scores": {"type": "object", "required": ["mean", "var", "tails"]},
    },
}
