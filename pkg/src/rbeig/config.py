"""Experiment configuration: JSON schema, defaults, presets and a stable digest."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

from .greedy import GreedyConfig
from .mesh import PRESETS, GeometrySpec
from .parameter import ParameterDomain

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 1}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "geometry": {
            "oneOf": [
                {"type": "string", "enum": sorted(PRESETS)},
                {
                    "type": "object",
                    "required": ["rectangles", "dirichlet_edges"],
                    "properties": {
                        "rectangles": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["x", "y", "subdomain"],
                                "properties": {"x": _pair, "y": _pair, "subdomain": {"type": "integer", "minimum": 0}},
                            },
                        },
                        "dirichlet_edges": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _pair}},
                        "mesh_h": _pos,
                    },
                },
            ]
        },
        "mesh_h": _pos,
        "E_range": _pair,
        "nu_range": _pair,
        "mu_ref": {"type": ["array", "null"], "items": _num},
        "K": _int,
        "method": {"enum": ["greedy", "pod"]},
        "greedy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "variant": {"enum": ["single", "multi"]},
                "extended": {"type": "boolean"},
                "init": {"enum": ["pod", "reference"]},
                "eps_tol": _pos,
                "eps_lambda": _pos,
                "eps_proj": _pos,
                "n_init": {"type": ["integer", "null"], "minimum": 1},
                "n_max": _int,
            },
        },
        "pod": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"N": _int, "extended": {"type": "boolean"}},
        },
        "samples": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train": _int,
                "test": _int,
                "pod_train": {"type": ["integer", "null"], "minimum": 1},
                "pod_corners": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "solver_tol": _pos,
        "study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N_grid": {"type": "array", "items": _int},
                "variants": {
                    "type": "array",
                    "items": {"enum": ["pod-extended", "pod-plain", "greedy-multi", "greedy-single", "greedy-single-noinit"]},
                },
            },
        },
        "timing": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"Ns": {"type": "array", "items": _int}, "repetitions": _int},
        },
    },
}

DEFAULTS = {
    "geometry": "beam3",
    "mesh_h": None,
    "E_range": [10.0, 100.0],
    "nu_range": [0.1, 0.4],
    "mu_ref": None,
    "K": 4,
    "method": "greedy",
    "greedy": {
        "variant": "single",
        "extended": True,
        "init": "pod",
        "eps_tol": 1e-6,
        "eps_lambda": 1e-3,
        "eps_proj": 1e-6,
        "n_init": None,
        "n_max": 150,
    },
    "pod": {"N": 100, "extended": True},
    "samples": {"train": 1000, "test": 200, "pod_train": None, "pod_corners": False},
    "seed": 0,
    "solver_tol": 1e-10,
    "study": {
        "N_grid": [10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
        "variants": ["pod-extended", "pod-plain", "greedy-multi", "greedy-single", "greedy-single-noinit"],
    },
    "timing": {"Ns": [50, 100, 150, 200], "repetitions": 20},
}

DESK_MESH_H = {"beam3": 1 / 22, "wallslab": 1 / 10}
PAPER_MESH_H = {"beam3": 1 / 50, "wallslab": 1 / 28}
PAPER_SAMPLES = {"train": 10000, "test": 1000}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def normalize(raw=None, seed=None, paper_scale=False):
    """Validate and fill defaults; the result is what gets hashed."""
    raw = dict(raw or {})
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if paper_scale:
        cfg["samples"].update(PAPER_SAMPLES)
        if isinstance(cfg["geometry"], str):
            cfg["mesh_h"] = PAPER_MESH_H[cfg["geometry"]]
    if seed is not None:
        cfg["seed"] = int(seed)
    if cfg["mesh_h"] is None:
        if isinstance(cfg["geometry"], str):
            cfg["mesh_h"] = DESK_MESH_H[cfg["geometry"]]
        elif "mesh_h" in cfg["geometry"]:
            cfg["mesh_h"] = cfg["geometry"]["mesh_h"]
        else:
            raise ConfigError("custom geometry needs mesh_h")
    jsonschema.validate(cfg, SCHEMA)
    return cfg


def load(path, seed=None, paper_scale=False):
    with open(path, encoding="utf-8") as fh:
        return normalize(json.load(fh), seed, paper_scale)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def geometry(cfg) -> GeometrySpec:
    g = cfg["geometry"]
    if isinstance(g, str):
        return PRESETS[g](cfg["mesh_h"])
    d = dict(g)
    d["mesh_h"] = cfg["mesh_h"]
    return GeometrySpec.from_dict(d)


def domain(cfg, n_subdomains) -> ParameterDomain:
    return ParameterDomain.isotropic(n_subdomains, tuple(cfg["E_range"]), tuple(cfg["nu_range"]), cfg["mu_ref"])


def greedy_config(cfg) -> GreedyConfig:
    g = cfg["greedy"]
    return GreedyConfig(
        K=cfg["K"],
        n_max=g["n_max"],
        eps_tol=g["eps_tol"],
        eps_lambda=g["eps_lambda"],
        eps_proj=g["eps_proj"],
        n_init=g["n_init"],
        variant=g["variant"],
        extended=g["extended"],
        init=g["init"],
        solver_tol=cfg["solver_tol"],
    )


def seeds(cfg):
    """Independent seeds of the train, test and POD-train samples."""
    s = cfg["seed"]
    return {"train": 3 * s + 1, "test": 3 * s + 2, "pod_train": 3 * s + 3}


def write(cfg, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
