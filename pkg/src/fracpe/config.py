"""Run configuration: a single JSON document validated against a published
schema before any computation touches it."""

from __future__ import annotations

import json
import math
import os

import jsonschema

EXPERIMENTS = ("check-noise", "gen-fbm", "ou-stats", "simulate", "pullback",
               "absorb", "contract")

SCHEMA_VERSION = 1

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fracpe run configuration",
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "Lx": {"type": "number", "exclusiveMinimum": 0},
                "Ly": {"type": "number", "exclusiveMinimum": 0},
                "alpha_robin": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "truncation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M_h": {"type": "integer", "minimum": 1},
                "K_v": {"type": "integer", "minimum": 1},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "H": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta_shift": {"type": "number", "minimum": 0},
                "decay_p": {"type": "number", "minimum": 0},
                "truncation": {"type": "integer", "minimum": 1},
                "alpha_frac": {"type": "number", "exclusiveMinimum": 0,
                               "exclusiveMaximum": 0.5},
                "amplitude": {"type": "number", "minimum": 0},
                "generator_test_mode": {"type": "boolean"},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "f0": {"type": "number"},
                "beta_coriolis": {"type": "number"},
                "Q_first_mode": {"type": "number"},
                "nonlinear": {"type": "boolean"},
                "coriolis": {"type": "boolean"},
                "coupling": {"type": "boolean"},
            },
        },
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "fbm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "H": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 2},
                "stream_id": {"type": "integer", "minimum": 0},
                "two_sided": {"type": "boolean"},
            },
        },
        "ou_stats": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["moment", "growth", "holder"]},
                "m": {"type": "integer", "minimum": 2},
                "n_samples": {"type": "integer", "minimum": 1},
                "beta_grid": {"type": "array", "items": {"type": "number"}},
                "T_lookbacks": {"type": "array", "items": {"type": "number"}},
                "sample_dt": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rho": {"type": "number", "minimum": 0},
                "state_seed": {"type": "integer", "minimum": 0},
                "snapshot_every": {"type": "integer", "minimum": 1},
            },
        },
        "pullback": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "start_times": {"type": "array", "items": {"type": "number"},
                                "minItems": 1},
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "n_states": {"type": "integer", "minimum": 2},
                "n_seeds": {"type": "integer", "minimum": 1},
            },
        },
        "absorb": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rhos": {"type": "array", "items": {"type": "number"}},
                "window": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "contract": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "perturbation_scales": {"type": "array", "items": {"type": "number"}},
                "perturbation_size": {"type": "number", "exclusiveMinimum": 0},
                "n_seeds": {"type": "integer", "minimum": 1},
                "rho": {"type": "number", "minimum": 0},
                "spread_tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "domain": {"Lx": math.pi, "Ly": math.pi, "alpha_robin": 1.0},
    "truncation": {"M_h": 4, "K_v": 2},
    "noise": {"H": 0.75, "beta_shift": 4.0, "decay_p": 10.0, "truncation": 30,
              "alpha_frac": 0.3, "amplitude": 1.0, "generator_test_mode": False},
    "params": {"f0": 1.0, "beta_coriolis": 1.0, "Q_first_mode": 1.0,
               "nonlinear": True, "coriolis": True, "coupling": True},
    "dt": 0.01,
    "horizon": 10.0,
    "fbm": {"H": 0.75, "dt": 1 / 256, "n": 257, "stream_id": 0, "two_sided": False},
    "ou_stats": {"kind": "moment", "m": 2, "n_samples": 2000,
                 "beta_grid": [1.0, 4.0, 16.0], "T_lookbacks": [4.0, 16.0, 64.0],
                 "sample_dt": 1 / 64},
    "simulate": {"rho": 1.0, "state_seed": 0, "snapshot_every": 100},
    "pullback": {"start_times": [-4.0, -8.0, -16.0, -32.0], "rho": 1.0,
                 "n_states": 5, "n_seeds": 10},
    "absorb": {"rhos": [1.0, 10.0, 100.0], "window": 1.0},
    "contract": {"perturbation_scales": [1.0, 1e-2, 1e-4],
                 "perturbation_size": 1e-3, "n_seeds": 5, "rho": 2.0,
                 "spread_tolerance": 0.2},
}

# check-noise needs a gamma-sorted catalog deep enough for the 1% tail rule
CHECK_NOISE_TRUNCATION = {"M_h": 28, "K_v": 14}
CHECK_NOISE_MODES = 6000


class ConfigError(ValueError):
    """Configuration rejected; message carries the JSON path and source line."""


def _find_line(text: str, json_path) -> int | None:
    """Best-effort source line of the last key in a JSON path."""
    keys = [p for p in json_path if isinstance(p, str)]
    if not keys:
        return 1
    needle = f'"{keys[-1]}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path, overrides: dict | None = None) -> dict:
    """Parse, validate and default-fill a run configuration."""
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        line = _find_line(text, list(e.absolute_path))
        loc = f"{path}:{line}" if line else path
        jp = "/".join(str(p) for p in e.absolute_path) or "(root)"
        raise ConfigError(f"{loc}: at {jp}: {e.message}")
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg


def env_out_root() -> str | None:
    return os.environ.get("FRACPE_OUT")


def env_threads() -> int | None:
    v = os.environ.get("FRACPE_THREADS")
    return int(v) if v else None


def write_schema(path) -> None:
    with open(path, "w") as fh:
        json.dump(CONFIG_SCHEMA, fh, indent=1, sort_keys=True)
