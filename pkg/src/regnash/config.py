"""Flat ``key=value`` run configuration with command-line overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    game: str
    out: str
    transform: str = "none"
    eta: float = 1.0
    eta_decay_target: float | None = None
    eta_half_life: float = 0.0
    regularizer: str = "entropy"
    dt: float = 0.01
    steps: int = 1000
    mode: str = "plain_y"
    integrator: str = "heun"
    denominator: str = "per_infostate"
    anchor: str | None = None
    reach_floor: float = 1e-8
    anchor_every: int | None = None
    anchors: int = 1
    interpolation: str = "hard"
    stride: int = 100
    reference: str | None = None
    snapshot_every: int = 0
    policy_out: str | None = None
    seed: int | None = None


CHOICES = {
    "transform": ("none", "monotone", "zerosum"),
    "regularizer": ("entropy", "l2"),
    "mode": ("plain_y", "bounded_w"),
    "integrator": ("euler", "heun", "rk4"),
    "denominator": ("per_infostate", "per_history"),
    "interpolation": ("hard", "linear_half"),
}
POSITIVE = ("eta", "dt", "stride", "anchors", "anchor_every", "reach_floor")
NON_NEGATIVE = ("steps", "eta_half_life", "eta_decay_target", "snapshot_every")
REQUIRED = ("game", "out")

DOCS = {
    "game": "kuhn | leduc | matrix:<path or builtin> | polymatrix:<path>",
    "out": "output CSV path",
    "transform": "reward transformation: none, monotone or zerosum",
    "eta": "regularisation strength (initial value when decaying)",
    "eta_decay_target": "decay eta exponentially towards this value",
    "eta_half_life": "half-life in time units of the eta decay",
    "regularizer": "entropy or l2",
    "dt": "time step",
    "steps": "number of integration steps (plain runs)",
    "mode": "plain_y or bounded_w",
    "integrator": "euler, heun or rk4",
    "denominator": "per_infostate or per_history (monotone transform)",
    "anchor": "anchor policy file for plain runs (default uniform)",
    "reach_floor": "floor on the counterfactual-reach denominator (plain runs)",
    "anchor_every": "steps per anchor; enables the anchoring loop",
    "anchors": "number of anchors",
    "interpolation": "hard or linear_half anchor switching",
    "stride": "diagnostics sampled every this many steps",
    "reference": "reference policy file, 'nash' (matrix games and kuhn) or 'qre' (matrix games)",
    "snapshot_every": "write a policy snapshot every this many steps (0 = off)",
    "policy_out": "write the final policy to this path",
    "seed": "random interior initial policy from this seed (default uniform start)",
}


def _types():
    out = {}
    for f in fields(RunConfig):
        t = str(f.type)
        out[f.name] = int if "int" in t else float if "float" in t else str
    return out


TYPES = _types()
KEYS = tuple(TYPES)
OPTIONAL = tuple(f.name for f in fields(RunConfig) if "None" in str(f.type))


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key not in TYPES:
        raise ConfigError(f"unknown configuration key {key!r}", key=key)
    typ = TYPES[key]
    if raw.lower() in ("", "none") and key in OPTIONAL:
        return None
    try:
        if typ is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if typ is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"malformed number for {key}: {raw!r}", key=key) from None
    return raw


def parse_pairs(text: str) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = _convert(key, raw)
    return values


def validate_config(values: dict) -> RunConfig:
    for key in values:
        if key not in TYPES:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
    for key in REQUIRED:
        if values.get(key) in (None, ""):
            raise ConfigError(f"missing required key {key!r}", key=key)
    for key, allowed in CHOICES.items():
        if key in values and values[key] not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {values[key]!r}", key=key)
    for key in POSITIVE:
        v = values.get(key)
        if v is not None and not v > 0:
            raise ConfigError(f"{key} must be positive, got {v!r}", key=key)
    for key in NON_NEGATIVE:
        v = values.get(key)
        if v is not None and v < 0:
            raise ConfigError(f"{key} must be non-negative, got {v!r}", key=key)
    if values.get("eta_decay_target") is not None and not values.get("eta_half_life"):
        raise ConfigError("eta_decay_target needs a positive eta_half_life", key="eta_half_life")
    if values.get("anchor") is not None and values.get("anchor_every") is not None:
        raise ConfigError("the anchoring loop starts from the uniform policy; drop 'anchor'", key="anchor")
    clean = {k: v for k, v in values.items() if v is not None or k not in REQUIRED}
    return RunConfig(**clean)


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a config file (if any) and apply overrides; overrides win."""
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                values.update(parse_pairs(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc.strerror}") from None
    for key, raw in (overrides or {}).items():
        values[key] = _convert(key, raw) if isinstance(raw, str) else raw
    return validate_config(values)


def dumps_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name}={getattr(cfg, f.name)}\n" for f in fields(RunConfig)
                   if getattr(cfg, f.name) is not None)


def with_values(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
