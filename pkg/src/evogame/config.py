"""Scenario configuration: schema validation, defaults and game construction.

Structural checks run through a JSON Schema so every error carries the
JSON pointer of the offending field; semantic checks (weights summing to
one, triangular ordering, state dimensions) add their own pointers.
"""
from __future__ import annotations

import copy
import json
import os

import jsonschema
import numpy as np

from .agents import ImitationModel, MWAllocationModel, ReproductionModel
from .distributions import group_from_dict
from .dynamics import DynamicsSpec
from .game import (
    DEFAULT_RESOLUTION,
    HardSVMGame,
    KNNGame,
    RetentionGame,
    StabilizedGame,
    oracle_game,
    read_fitness_table,
    soft_svm_game,
)
from .scenarios import SCENARIOS

U64 = 2**64 - 1
NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
PROB = {"type": "number", "minimum": 0, "maximum": 1}
STATE = {"type": "array", "items": {"type": "number"}, "minItems": 1}


def _variant(name, required, props):
    return {
        "if": {"properties": {"variant": {"const": name}}},
        "then": {"required": required, "properties": props},
    }


SHAPE = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform", "triangular", "point", "gaussian"]},
        "lo": NUM, "hi": NUM, "a": NUM, "b": NUM, "c": NUM, "mean": NUM, "std": POS,
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "uniform"}}}, "then": {"required": ["lo", "hi"]}},
        {"if": {"properties": {"kind": {"const": "triangular"}}}, "then": {"required": ["a", "b", "c"]}},
        {"if": {"properties": {"kind": {"const": "point"}}}, "then": {"required": ["a"]}},
        {"if": {"properties": {"kind": {"const": "gaussian"}}}, "then": {"required": ["mean", "std"]}},
    ],
}

COMPONENT = {
    "type": "object",
    "required": ["shape", "weight", "label"],
    "properties": {
        "shape": SHAPE,
        "weight": {"type": "number", "minimum": 0},
        "label": {"enum": [-1, 1]},
        "flip_prob": PROB,
    },
    "additionalProperties": False,
}

GROUP = {
    "type": "object",
    "required": ["components"],
    "properties": {"components": {"type": "array", "minItems": 1, "items": COMPONENT}},
    "additionalProperties": False,
}

LEARNER = {
    "type": "object",
    "required": ["variant"],
    "properties": {
        "variant": {"enum": ["oracle_threshold", "soft_svm", "hard_svm_mc", "knn_closed_form",
                             "table", "stabilized", "retention"]},
    },
    "allOf": [
        _variant("soft_svm", ["lambda"], {"lambda": POS, "quad_tol": POS, "reg_scale": POS}),
        _variant("hard_svm_mc", ["n", "trials"], {"n": {"type": "integer", "minimum": 1},
                                                   "trials": {"type": "integer", "minimum": 1}}),
        _variant("knn_closed_form", ["alpha", "beta"], {
            "alpha": PROB, "beta": {"type": "number", "minimum": 0.5, "maximum": 1},
            "k": {"type": "integer", "minimum": 1}}),
        _variant("table", ["path"], {"path": {"type": "string"}}),
        _variant("stabilized", ["inner", "p_star"], {"inner": {"$ref": "#/definitions/learner"},
                                                     "p_star": STATE}),
        _variant("retention", ["inner"], {"inner": {"$ref": "#/definitions/learner"}, "a": POS,
                                          "b": {"type": "array", "items": {"type": "number", "minimum": 0}}}),
    ],
}

DYNAMICS = {
    "type": "object",
    "properties": {
        "variant": {"enum": ["replicator_continuous", "replicator_discrete",
                             "multiplicative_weights", "stochastic_replicator"]},
        "dt": POS, "horizon": POS,
        "beta": {"type": "number", "exclusiveMinimum": 1},
        "eta": {"type": "number", "minimum": 0},
        "noise_std": {"oneOf": [{"type": "number", "minimum": 0},
                                {"type": "array", "items": {"type": "number", "minimum": 0}}]},
        "fixed_point_tol": {"type": "number", "minimum": 0},
        "dominance_eps": PROB,
        "record_every": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

ANALYSIS = {
    "type": "object",
    "properties": {
        "initial_state": STATE,
        "grid_resolution": {"type": "integer", "minimum": 2},
        "refine_tol": POS,
        "eq_tol": POS,
        "h_step": POS,
        "table_resolution": {"type": "integer", "minimum": 2},
        "basin_resolution": {"type": "integer", "minimum": 2},
        "label_radius": POS,
        "fairness_eps": PROB,
        "fairness_tol": POS,
        "bifurcation": {
            "type": "object",
            "required": ["param", "values"],
            "properties": {"param": {"type": "string"},
                           "values": {"type": "array", "items": NUM, "minItems": 1}},
            "additionalProperties": False,
        },
        "stabilization": {
            "type": "object",
            "properties": {"offsets": {"type": "array", "items": NUM}, "p_star": STATE},
            "additionalProperties": False,
        },
        "report": {
            "type": "object",
            "properties": {"segments": {"type": "integer", "minimum": 1},
                           "trajectories": {"type": "integer", "minimum": 0},
                           "steps": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

AGENTS = {
    "type": "object",
    "required": ["model", "counts"],
    "properties": {
        "model": {"enum": ["reproduction", "imitation", "mw_allocation"]},
        "counts": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "horizon": POS,
        "replicates": {"type": "integer", "minimum": 1},
        "lambda_rate": POS, "alpha_invite": PROB, "beta_drop": PROB, "dt": POS,
        "pairs_per_step": {"type": "integer", "minimum": 1},
        "scale": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "beta": {"type": "number", "exclusiveMinimum": 1}, "revenue": NUM,
        "costs": {"type": "array", "items": NUM}, "conversion": PROB, "budget": POS,
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "definitions": {"learner": LEARNER},
    "type": "object",
    "required": ["learner"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": U64},
        "groups": {"oneOf": [
            {"type": "array", "items": GROUP, "minItems": 1},
            {"type": "object", "required": ["construction"],
             "properties": {"construction": {"enum": sorted(SCENARIOS)}, "params": {"type": "object"}},
             "additionalProperties": False},
        ]},
        "learner": {"$ref": "#/definitions/learner"},
        "dynamics": DYNAMICS,
        "analysis": ANALYSIS,
        "agents": AGENTS,
        "output_dir": {"type": "string"},
        "_meta": {"type": "object"},
    },
    "additionalProperties": False,
}

LEARNER_DEFAULTS = {
    "soft_svm": {"quad_tol": 1e-10, "reg_scale": 1.0},
    "knn_closed_form": {"k": 1},
    "retention": {"a": 1.0},
}
ANALYSIS_DEFAULTS = {
    "refine_tol": 1e-10,
    "h_step": 1e-5,
    "table_resolution": 10,
    "basin_resolution": 20,
    "label_radius": 1e-3,
    "fairness_eps": 0.01,
    "fairness_tol": 1e-6,
}
AGENT_DEFAULTS = {"horizon": 100.0, "replicates": 1}


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is the JSON pointer of the field."""

    def __init__(self, pointer, message):
        self.pointer = pointer or "/"
        super().__init__(f"{self.pointer}: {message}")


def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else "/"


def _materialize_learner(spec):
    spec = dict(spec)
    for k, v in LEARNER_DEFAULTS.get(spec["variant"], {}).items():
        spec.setdefault(k, v)
    if "inner" in spec:
        spec["inner"] = _materialize_learner(spec["inner"])
    return spec


def materialize(raw, game=None):
    """Return a copy of ``raw`` with every default filled in.

    ``game`` (the built game) supplies the defaults that depend on it:
    equilibrium tolerance and search resolution.
    """
    cfg = copy.deepcopy(raw)
    cfg.setdefault("name", "scenario")
    if isinstance(cfg.get("groups"), list):
        for gd in cfg["groups"]:
            for comp in gd["components"]:
                comp.setdefault("flip_prob", 0.0)
    cfg.setdefault("seed", 0)
    cfg["learner"] = _materialize_learner(cfg["learner"])
    cfg["dynamics"] = DynamicsSpec(**cfg.get("dynamics", {})).to_dict()
    analysis = cfg.setdefault("analysis", {})
    for k, v in ANALYSIS_DEFAULTS.items():
        analysis.setdefault(k, v)
    if game is not None:
        analysis.setdefault("eq_tol", game.eq_tol)
        if game.K in DEFAULT_RESOLUTION:
            analysis.setdefault("grid_resolution", DEFAULT_RESOLUTION[game.K])
    if "agents" in cfg:
        agents = cfg["agents"]
        for k, v in AGENT_DEFAULTS.items():
            agents.setdefault(k, v)
        model = build_agent_model(agents)
        agents.update({k: v for k, v in model.to_dict().items() if k != "model"})
    return cfg


def _groups(cfg):
    g = cfg.get("groups")
    if g is None:
        return None
    if isinstance(g, dict):
        try:
            return SCENARIOS[g["construction"]](**g.get("params", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError("/groups/params", str(exc)) from None
    out = []
    for i, gd in enumerate(g):
        for j, comp in enumerate(gd["components"]):
            try:
                group_from_dict({"components": [dict(comp, weight=1.0)]})
            except ValueError as exc:
                raise ConfigError(f"/groups/{i}/components/{j}/shape", str(exc)) from None
        try:
            out.append(group_from_dict(gd))
        except ValueError as exc:
            raise ConfigError(f"/groups/{i}/components", str(exc)) from None
    return out


def _check_state(vec, K, pointer):
    arr = np.asarray(vec, dtype=float)
    if arr.size != K:
        raise ConfigError(pointer, f"expected {K} entries, got {arr.size}")
    if np.any(arr < -1e-12) or abs(arr.sum() - 1.0) > 1e-6:
        raise ConfigError(pointer, "not a point on the probability simplex")


def validate(cfg, base_dir="."):
    """Schema plus semantic validation; raises :class:`ConfigError`."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        # the deepest error names the most specific field
        err = max(errors, key=lambda e: len(e.absolute_path))
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ConfigError(_pointer(err.absolute_path), err.message)
    try:
        DynamicsSpec(**cfg.get("dynamics", {}))
    except ValueError as exc:
        raise ConfigError("/dynamics", str(exc)) from None
    game = build_game(cfg, base_dir)
    a = cfg.get("analysis", {})
    if "initial_state" in a:
        _check_state(a["initial_state"], game.K, "/analysis/initial_state")
    if "stabilization" in a and "p_star" in a["stabilization"]:
        _check_state(a["stabilization"]["p_star"], game.K, "/analysis/stabilization/p_star")
    if "agents" in cfg:
        if len(cfg["agents"]["counts"]) != game.K:
            raise ConfigError("/agents/counts", f"expected {game.K} entries")
        try:
            build_agent_model(cfg["agents"])
        except ValueError as exc:
            raise ConfigError("/agents", str(exc)) from None
    noise = cfg.get("dynamics", {}).get("noise_std")
    if isinstance(noise, list) and len(noise) != game.K:
        raise ConfigError("/dynamics/noise_std", f"expected {game.K} entries")
    return game


def _build_learner(spec, groups, base_dir, seed, pointer):
    v = spec["variant"]
    try:
        if v in ("oracle_threshold", "soft_svm", "hard_svm_mc") and groups is None:
            raise ConfigError("/groups", f"learner {v!r} needs groups")
        if v == "oracle_threshold":
            return oracle_game(groups)
        if v == "soft_svm":
            return soft_svm_game(groups, spec["lambda"], spec.get("quad_tol", 1e-10),
                                 spec.get("reg_scale", 1.0))
        if v == "hard_svm_mc":
            return HardSVMGame(groups, spec["n"], spec["trials"], seed=seed)
        if v == "knn_closed_form":
            return KNNGame(spec["alpha"], spec["beta"], spec.get("k", 1))
        if v == "table":
            path = os.path.join(base_dir, spec["path"])
            if not os.path.exists(path):
                raise ConfigError(pointer + "/path", f"no such table file {spec['path']!r}")
            return read_fitness_table(path)
        inner = _build_learner(spec["inner"], groups, base_dir, seed, pointer + "/inner")
        if v == "stabilized":
            _check_state(spec["p_star"], inner.K, pointer + "/p_star")
            return StabilizedGame(inner, spec["p_star"])
        b = spec.get("b")
        if b is not None and len(b) != inner.K:
            raise ConfigError(pointer + "/b", f"expected {inner.K} entries")
        return RetentionGame(inner, spec.get("a", 1.0), b)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(pointer, str(exc)) from None


def derive_seed(seed, purpose):
    """Independent 64-bit seed for one purpose (0 game, 1 dynamics, 2+ agents)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_game(cfg, base_dir="."):
    groups = _groups(cfg)
    return _build_learner(cfg["learner"], groups, base_dir, derive_seed(cfg.get("seed", 0), 0),
                          "/learner")


def with_learner_param(cfg, name, value):
    """Copy of ``cfg`` with the first learner (or inner learner) field ``name`` set."""
    cfg = copy.deepcopy(cfg)
    spec = cfg["learner"]
    while name not in spec and "inner" in spec:
        spec = spec["inner"]
    if name not in spec:
        raise ConfigError("/analysis/bifurcation/param", f"learner has no parameter {name!r}")
    spec[name] = value
    return cfg


def build_agent_model(agents):
    m = agents["model"]
    if m == "reproduction":
        keys = ("lambda_rate", "alpha_invite", "beta_drop", "dt")
        return ReproductionModel(**{k: agents[k] for k in keys if k in agents})
    if m == "imitation":
        keys = ("pairs_per_step", "scale")
        return ImitationModel(**{k: agents[k] for k in keys if k in agents})
    keys = ("beta", "revenue", "costs", "conversion", "budget")
    return MWAllocationModel(**{k: agents[k] for k in keys if k in agents})


def load(path, seed=None):
    """Read, validate and materialize a config file.

    Returns ``(cfg, base_dir)``; relative table paths resolve against the
    config file's directory.
    """
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("/", "config must be a JSON object")
    raw.pop("_meta", None)
    if seed is not None:
        raw["seed"] = int(seed)
    game = validate(raw, base_dir)
    cfg = materialize(raw, game)
    validate(cfg, base_dir)
    return cfg, base_dir
