"""Experiment configuration: YAML (or JSON) files validated against a JSON schema."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .distributions import DistributionError, StepDistribution, distribution_from_dict
from .functionals import geometric_grid

SUITES = ("functionals", "exit", "pruitt", "scaling", "gaussian", "witness", "lemmas")
CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

_GRID = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["values"],
         "properties": {"values": {"type": "array", "minItems": 1, "items": _pos}}},
        {"type": "object", "additionalProperties": False, "required": ["lo"],
         "properties": {"lo": _pos, "hi": _pos, "points": _posint, "ratio": {
             "type": "number", "exclusiveMinimum": 1}}},
    ]
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["suite", "seed"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "suite": {"enum": list(SUITES) + ["all"]},
        "seed": {"type": "integer", "minimum": 0},
        "space": {"type": "object", "additionalProperties": False,
                  "properties": {"p": {"type": "number", "minimum": 1}, "d": _posint}},
        "distribution": {"type": "object"},
        "distributions": {"type": "array", "items": {"type": "object"}},
        "r_grid": _GRID,
        "n_grid": _GRID,
        "paths": {"type": "integer", "minimum": 100},
        "sn_paths": {"type": "integer", "minimum": 100},
        "truncation_paths": {"type": "integer", "minimum": 1},
        "cap": {"oneOf": [
            {"type": "object", "additionalProperties": False, "required": ["policy"],
             "properties": {"policy": {"const": "auto"}, "factor": _pos}},
            {"type": "object", "additionalProperties": False, "required": ["policy", "value"],
             "properties": {"policy": {"const": "fixed"}, "value": _posint}},
        ]},
        "budget": {"type": "number", "minimum": 1},
        "band": {"type": "number", "minimum": 1},
        "z": _pos,
        "mc_samples": {"type": "integer", "minimum": 1000},
        "moment_samples": {"type": "integer", "minimum": 1000},
        "hd_pairs": {"type": "integer", "minimum": 0},
        "h_limit_tol": _pos,
        "threads": _posint,
        "output_dir": {"type": "string"},
        "scaling": {
            "type": "object", "additionalProperties": False, "required": ["d_list"],
            "properties": {
                "p": {"oneOf": [{"type": "number", "minimum": 2},
                                {"type": "array", "minItems": 1,
                                 "items": {"type": "number", "minimum": 2}}]},
                "k": _posint,
                "d_list": {"type": "array", "minItems": 3, "items": _posint},
                "control_k": {"type": "array", "items": _posint},
                "slope_tol": _pos,
            }},
        "witness": {
            "type": "object", "additionalProperties": False, "required": ["vectors"],
            "properties": {
                "vectors": {"type": "array", "minItems": 1,
                            "items": {"type": "array", "minItems": 1, "items": _num}},
                "gauss_samples": {"type": "integer", "minimum": 1000},
                "tol": _pos,
            }},
    },
}

DEFAULTS = {
    "version": CONFIG_VERSION,
    "space": {"p": 2.0},
    "r_grid": {"lo": 4.0, "points": 8, "ratio": 2 ** 0.25},
    "paths": 10_000,
    "cap": {"policy": "auto", "factor": 200.0},
    "budget": 4.0,
    "band": 10.0,
    "z": 3.0,
    "mc_samples": 1_000_000,
    "moment_samples": 1_000_000,
    "hd_pairs": 200,
    "h_limit_tol": 0.05,
}

# keys that change where or how fast a run happens, never what it computes
_NOT_HASHED = ("threads", "output_dir")


def _path(err: jsonschema.ValidationError) -> str:
    parts = ["config"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts).replace(".[", "[")


def _grid_values(spec: dict, integer: bool = False) -> list:
    if "values" in spec:
        vals = [float(v) for v in spec["values"]]
    else:
        vals = [float(v) for v in geometric_grid(spec["lo"], spec.get("hi"), spec.get("points"),
                                                 spec.get("ratio", 2 ** 0.25))]
    if integer:
        return sorted({int(round(v)) for v in vals})
    return sorted(vals)


@dataclass
class ExperimentConfig:
    """A validated experiment; ``raw`` holds the normalized mapping."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: expected a mapping at the top level")
        validator = jsonschema.Draft7Validator(SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            if e.validator == "additionalProperties":
                extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
                raise ConfigError(f"{_path(e)}: unknown key(s) {extra}")
            if e.validator == "required":
                raise ConfigError(f"{_path(e)}: {e.message}")
            raise ConfigError(f"{_path(e)}: {e.message}")
        raw = copy.deepcopy(DEFAULTS)
        for key, val in copy.deepcopy(data).items():
            if isinstance(val, dict) and isinstance(raw.get(key), dict) and key != "r_grid" \
                    and key != "cap":
                raw[key].update(val)
            else:
                raw[key] = val
        if "distribution" in raw and "distributions" in raw:
            raise ConfigError("config: give either 'distribution' or 'distributions', not both")
        if "distribution" in raw:
            raw["distributions"] = [raw.pop("distribution")]
        raw["space"]["p"] = float(raw["space"]["p"])
        cfg = cls(raw)
        cfg.distributions()     # validates every distribution with its key path
        needs = {"functionals", "exit", "pruitt", "gaussian", "lemmas"}
        if raw["suite"] in needs and not raw.get("distributions"):
            raise ConfigError(f"config.distributions: required for suite {raw['suite']!r}")
        if raw["suite"] == "scaling" and "scaling" not in raw:
            raise ConfigError("config.scaling: required for suite 'scaling'")
        if raw["suite"] == "witness" and "witness" not in raw:
            raise ConfigError("config.witness: required for suite 'witness'")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        return cls.from_dict(parse_text(text, str(path)))

    # -- accessors ---------------------------------------------------------------
    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def suite(self) -> str:
        return self.raw["suite"]

    @property
    def suites(self) -> list:
        if self.suite != "all":
            return [self.suite]
        out = []
        for s in SUITES:
            if s == "scaling" and "scaling" not in self.raw:
                continue
            if s == "witness" and "witness" not in self.raw:
                continue
            if s not in ("scaling", "witness") and not self.raw.get("distributions"):
                continue
            out.append(s)
        return out

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def p(self) -> float:
        return float(self.raw["space"]["p"])

    def distributions(self) -> list[StepDistribution]:
        out = []
        d = self.raw["space"].get("d")
        for i, spec in enumerate(self.raw.get("distributions", [])):
            where = f"config.distributions[{i}]"
            try:
                dist = distribution_from_dict(spec, where)
            except DistributionError as exc:
                raise ConfigError(str(exc)) from None
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}: {exc}") from None
            if d is not None and dist.d != d:
                raise ConfigError(f"{where}: distribution has d={dist.d} but config.space.d={d}")
            out.append(dist)
        return out

    def r_values(self) -> list:
        return _grid_values(self.raw["r_grid"])

    def n_values(self) -> list | None:
        g = self.raw.get("n_grid")
        return None if g is None else _grid_values(g, integer=True)

    # -- serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def dumps(self, fmt: str = "yaml", canonical: bool = False) -> str:
        """Serialize; ``canonical`` drops the keys that do not affect results."""
        data = self.raw
        if canonical:
            data = {k: v for k, v in data.items() if k not in _NOT_HASHED}
        if fmt == "json":
            return json.dumps(data, indent=2, sort_keys=True) + "\n"
        return yaml.safe_dump(data, sort_keys=True, default_flow_style=None)

    def hash(self) -> str:
        """sha256 of the canonical JSON of everything that affects results."""
        core = {k: v for k, v in self.raw.items() if k not in _NOT_HASHED}
        blob = json.dumps(core, sort_keys=True, separators=(",", ":"), default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        raw = self.to_dict()
        for k, v in kw.items():
            if v is not None:
                raw[k] = v
        return ExperimentConfig.from_dict(raw)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.raw == other.raw


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def parse_text(text: str, source: str = "<string>") -> dict:
    """Parse YAML (a superset of JSON) into a mapping."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML/JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    return data


def finite_or_none(x):
    """JSON-safe float: NaN and infinities become None."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x
