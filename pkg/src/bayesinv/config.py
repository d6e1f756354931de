"""Experiment configuration: YAML files validated against a published schema.

Unknown keys anywhere are errors.  ``SCHEMA_VERSION`` is bumped whenever a key
changes meaning.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema
import yaml

from bayesinv.errors import ConfigError

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_numlist = {"type": "array", "items": _num, "minItems": 1}
_poslist = {"type": "array", "items": _pos, "minItems": 1}


def _obj(props, required=(), **extra):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False, **extra}


def _kind(name, props=None, required=()):
    p = {"kind": {"const": name}}
    p.update(props or {})
    return _obj(p, ("kind",) + tuple(required))


SCHEMA = _obj(
    {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "particles": _posint,
        "levels": {"type": "array", "items": _posint, "minItems": 1},
        "basis": {"oneOf": [
            _kind("index", {"dim": _posint}, ("dim",)),
            _kind("trig", {"K": {"type": "integer", "minimum": 0}, "sobolev": _num}, ("K",)),
        ]},
        "grid": _obj({"T": _pos, "steps": _posint}, ("T", "steps")),
        "forward": {"oneOf": [
            _kind("diagonal", {"entries": _numlist, "decay": _num, "scale": _num}),
            _kind("trig_smoothing", {"order": _num, "scale": _num}, ("order",)),
            _kind("sine_series", {"decay": _num, "scale": _num}),
            _kind("zero"),
        ]},
        "noise": {"oneOf": [
            _kind("gaussian", {"eigenvalues": _poslist, "decay": _num, "scale": _pos}),
            _kind("box_restricted", {"eigenvalues": _poslist, "decay": _num, "scale": _pos,
                                     "index": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                               "minItems": 1},
                                     "bound": _pos}, ("index", "bound")),
            _kind("laplace_fourier", {"b": _pos}, ("b",)),
            _kind("decomposable", {"family": {"enum": ["laplace", "gaussian", "cauchy"]}, "scale": _pos},
                  ("family", "scale")),
            _kind("spherical", {"eigenvalues": _poslist, "decay": _num, "scale": _pos,
                                "n_estimator_terms": _posint, "gamma_law": {"type": "string"}},
                  ("gamma_law",)),
            _kind("subordinated", {"shape": _pos, "rate": _pos, "floor": _pos, "stride": _posint}),
            _kind("girsanov"),
            _kind("finite_dim", {"family": {"enum": ["gaussian", "uniform_box", "laplace"]}, "scale": _pos},
                  ("family",)),
        ]},
        "prior": {"oneOf": [
            _kind("kl_truncation", {"sigmas": _poslist, "decay": _num}),
            _kind("hierarchical", {"sigmas": _poslist, "decay": _num, "edges": _numlist,
                                   "values": _numlist}, ("edges", "values")),
            _kind("quasi_uniform", {"marginal": {"enum": ["uniform", "gaussian"]}, "decay": _num}),
        ]},
        "observation": {"oneOf": [
            _kind("synthetic", {
                "truth": {"oneOf": [
                    _kind("prior_draw", {"seed": {"type": "integer", "minimum": 0}}),
                    _kind("explicit", {"coeffs": _numlist}, ("coeffs",)),
                    _kind("path", {"function": {"enum": ["bump", "cos", "sawtooth"]}}, ("function",)),
                ]},
                "noise_seed": {"type": "integer", "minimum": 0},
            }, ("truth",)),
            _kind("file", {"path": {"type": "string"}}, ("path",)),
        ]},
        "dictionary": _obj({"size": _posint, "seed": {"type": "integer", "minimum": 0}}),
        "ui": _obj({"C": _poslist}),
        "probe": _obj({"scales": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                       "directions": _posint}),
        "outputs": _obj({"formats": {"type": "array", "items": {"enum": ["csv", "json", "dat"]},
                                     "uniqueItems": True}}),
    },
    ("name", "seed", "particles", "levels", "basis", "forward", "noise", "prior", "observation"),
)


def validate(cfg):
    """Raise :class:`ConfigError` (with the offending key path) if ``cfg`` is invalid."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(e.absolute_path)))
    if errors:
        err = errors[0]
        best = jsonschema.exceptions.best_match(errors)
        raise ConfigError(best.message, best.absolute_path if best is not None else err.absolute_path)
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg):
    levels = cfg["levels"]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("levels must be strictly increasing", ("levels",))
    noise = cfg["noise"]["kind"]
    if noise in ("subordinated", "girsanov"):
        if "grid" not in cfg:
            raise ConfigError(f"noise kind {noise!r} needs a grid section", ("grid",))
        if cfg["forward"]["kind"] not in ("sine_series", "zero"):
            raise ConfigError("path-valued noise needs a sine_series forward map", ("forward", "kind"))
    elif cfg["forward"]["kind"] == "sine_series":
        raise ConfigError("sine_series forward maps need path-valued noise", ("forward", "kind"))
    if noise == "laplace_fourier" and cfg["basis"]["kind"] != "trig":
        raise ConfigError("laplace_fourier noise needs a trig basis", ("basis", "kind"))
    if cfg["forward"]["kind"] == "trig_smoothing" and cfg["basis"]["kind"] != "trig":
        raise ConfigError("trig_smoothing needs a trig basis", ("forward", "kind"))
    truth = cfg["observation"].get("truth", {})
    if truth.get("kind") == "path" and cfg["basis"]["kind"] != "trig":
        raise ConfigError("path truths are projected with trig_coeffs and need a trig basis",
                          ("observation", "truth", "kind"))


def load(path_or_text):
    """Parse YAML from a path or a string and validate it."""
    p = Path(path_or_text) if not isinstance(path_or_text, dict) else None
    if p is not None and "\n" not in str(path_or_text) and p.exists():
        text = p.read_text()
    elif isinstance(path_or_text, dict):
        return validate(copy.deepcopy(path_or_text))
    else:
        text = str(path_or_text)
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return validate(cfg)


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def schema_json():
    return json.dumps(SCHEMA, indent=2, sort_keys=True)
