"""Run configuration: JSON schema, line-aware validation and object builders."""

import hashlib
import json
import re

import jsonschema

from .exceptions import ConfigError
from .net import GENERATORS, Network, make_network
from .rules import CORRELATIONS, LOCI, NoiseSpec, RuleProfile, SignalModel

_num = {"type": "number"}
_num_or_list = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generator": {"enum": sorted(GENERATORS)},
                "n": {"type": "integer", "minimum": 2},
                "rows": _matrix,
                "labels": {"type": "array", "items": {"type": "string"}},
            },
        },
        "rules": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"m": _num_or_list, "gamma": _num_or_list,
                           "gamma_floor": {"type": "number", "exclusiveMinimum": 0}},
        },
        "signal": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"theta_variance": {"type": "number", "minimum": 0},
                           "sigma_sq": _num_or_list},
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "persistent_variance": {"type": "number", "minimum": 0},
                "persistent_bias": _num_or_list,
                "correlation": {"enum": list(CORRELATIONS)},
                "covariance": _matrix,
                "idiosyncratic_variance": {"type": "number", "minimum": 0},
                "locus": {"enum": list(LOCI)},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"kind": {"enum": ["synchronous", "alternating", "random_covering"]},
                           "coverage_K": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer"}},
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_T": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "blowup_threshold": {"type": "number", "exclusiveMinimum": 0},
                "trace_every": {"type": "integer", "minimum": 1},
                "player": {"type": "integer", "minimum": 0},
                "replicas": {"type": "integer", "minimum": 1},
                "horizon": {"type": "integer", "minimum": 1},
                "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "grid": {"type": "array", "items": {"type": "number"}},
                "varpi_grid": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "varpi0": {"type": "number", "minimum": 0},
                "n_per_star": {"type": "integer", "minimum": 3},
                "hub_mode": {"enum": ["dg", "benevolent"]},
                "theta": _num,
                "xi": _num,
                "b_mean": _num,
                "b_sd": {"type": "number", "exclusiveMinimum": 0},
                "symmetry": {"enum": ["none", "symmetric", "star"]},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

_UNEXPECTED = re.compile(r"'([^']+)' (?:was|were) unexpected")


def _locate(text, path, extra_key=None):
    """Best-effort 1-based line of the JSON element at ``path``."""
    pos = 0
    for key in list(path) + ([extra_key] if extra_key else []):
        if isinstance(key, str):
            j = text.find(f'"{key}"', pos)
            if j < 0:
                break
            pos = j
    return text.count("\n", 0, pos) + 1


def parse_config(text, source="<config>"):
    """Parse and schema-check a JSON config; errors carry file:line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validate_config(data, text, source)
    return data


def validate_config(data, text=None, source="<config>"):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    extra = _UNEXPECTED.search(err.message)
    line = _locate(text, err.absolute_path, extra.group(1) if extra else None) if text else 0
    where = "/".join(str(p) for p in err.absolute_path) or "(root)"
    raise ConfigError(f"{source}:{line}: {where}: {err.message}")


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, path)


def config_hash(data):
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def build_network(cfg):
    spec = cfg.get("network", {})
    try:
        if "rows" in spec:
            return Network.from_dict(spec)
        return make_network(spec.get("generator", "complete"), spec.get("n", 2))
    except ValueError as exc:
        raise ConfigError(f"network: {exc}") from None


def build_rules(cfg, n):
    r = cfg.get("rules", {})
    try:
        return RuleProfile.build(n, r.get("m", 0.5), r.get("gamma", 0.5),
                                 r.get("gamma_floor", 1e-3))
    except ValueError as exc:
        raise ConfigError(f"rules: {exc}") from None


def build_signal(cfg):
    try:
        return SignalModel(**cfg.get("signal", {}))
    except ValueError as exc:
        raise ConfigError(f"signal: {exc}") from None


def build_noise(cfg):
    try:
        return NoiseSpec(**cfg.get("noise", {}))
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None


def set_path(cfg, dotted, value):
    node = cfg
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
