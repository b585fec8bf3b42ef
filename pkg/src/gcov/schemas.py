"""JSON schemas of the reports written by the command-line tool."""

_number_list = {"type": "array", "items": {"type": "number"}}
_nullable_number = {"type": ["number", "null"]}

TEST_REPORT = {
    "type": "object",
    "required": ["statistic", "df", "p_value", "H", "K", "kind"],
    "properties": {
        "statistic": {"type": "number", "minimum": 0},
        "df": {"type": "integer", "minimum": 0},
        "p_value": _nullable_number,
        "H": {"type": "integer", "minimum": 1},
        "K": {"type": "integer", "minimum": 1},
        "kind": {"enum": ["weak_wn", "sur", "residual_based"]},
        "extra": {"type": "object"},
    },
}

ESTIMATE_REPORT = {
    "type": "object",
    "required": ["command", "model", "theta", "names", "se_corollary1", "se_hessian", "statistic",
                 "df", "p_value", "H", "K", "n_obs_used", "converged", "objective",
                 "jacobian_rank", "iterations", "flags", "residual_test", "residual_acf"],
    "properties": {
        "command": {"const": "estimate"},
        "model": {"type": "object"},
        "theta": _number_list,
        "names": {"type": "array", "items": {"type": "string"}},
        "se_corollary1": _number_list,
        "se_hessian": _number_list,
        "objective": {"type": "number", "minimum": 0},
        "statistic": {"type": "number", "minimum": 0},
        "df": {"type": "integer"},
        "p_value": _nullable_number,
        "H": {"type": "integer", "minimum": 1},
        "K": {"type": "integer", "minimum": 1},
        "n_obs_used": {"type": "integer", "minimum": 1},
        "converged": {"type": "boolean"},
        "jacobian_rank": {"type": "integer", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "flags": {"type": "array", "items": {"type": "string"}},
        "residual_test": TEST_REPORT,
        "residual_acf": {"type": "array"},
        "centering": _nullable_number,
    },
}

TEST_COMMAND_REPORT = {
    "type": "object",
    "required": ["command", "K", "T", "H", "weak_wn", "sur"],
    "properties": {
        "command": {"const": "test"},
        "K": {"type": "integer", "minimum": 1},
        "T": {"type": "integer", "minimum": 2},
        "H": {"type": "integer", "minimum": 1},
        "weak_wn": TEST_REPORT,
        "sur": TEST_REPORT,
    },
}

MONTECARLO_REPORT = {
    "type": "object",
    "required": ["family", "T", "replications", "seed", "params", "cells"],
    "properties": {
        "family": {"enum": ["ar_arch", "mar"]},
        "T": {"type": "integer"},
        "replications": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
        "params": {"type": "array", "items": {"type": "string"}},
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["replications", "failures", "flagged"],
                "properties": {
                    "replications": {"type": "integer"},
                    "failures": {"type": "integer", "minimum": 0},
                    "flagged": {"type": "boolean"},
                },
            },
        },
    },
}
