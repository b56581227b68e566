"""Run configuration: per-problem defaults, JSON config files, validation.

Config files are single flat JSON documents whose keys match the sweep.csv
columns where applicable (``N_f``, ``lr``, ``size``...); command-line flags
override file values.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

__all__ = ["Config", "ConfigError", "PROBLEM_ALIASES", "PROBLEM_DEFAULTS", "default_dims", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration; message names the offending field."""


PROBLEM_ALIASES = {
    "laplace": "laplace1d",
    "laplace1d": "laplace1d",
    "laplace-inverse": "laplace1d-inverse",
    "laplace1d-inverse": "laplace1d-inverse",
    "schrodinger": "schrodinger1d",
    "schrodinger1d": "schrodinger1d",
}

# lr / width / depth / iterations mirror the hyper-parameter table of each
# case; counts are the per-case training-set defaults.
PROBLEM_DEFAULTS = {
    "laplace1d": dict(lr=1e-4, width=50, depth=4, iterations=20000, n_f=512, n_g=2, n_h=0, m_obs=0),
    "laplace1d-inverse": dict(lr=1e-4, width=50, depth=4, iterations=20000, n_f=64, n_g=2, n_h=0, m_obs=64),
    "schrodinger1d": dict(lr=1e-4, width=100, depth=4, iterations=30000, n_f=2000, n_g=200, n_h=200, m_obs=0),
}

_PROBLEM_IO = {"laplace1d": (1, 1), "laplace1d-inverse": (1, 1), "schrodinger1d": (2, 2)}

# JSON / flag key -> Config field.  CSV-style names are accepted verbatim.
KEY_MAP = {
    "problem": "problem",
    "mode": "mode",
    "size": "ranks",
    "ranks": "ranks",
    "N_f": "n_f",
    "nf": "n_f",
    "n_f": "n_f",
    "N_g": "n_g",
    "ng": "n_g",
    "n_g": "n_g",
    "N_h": "n_h",
    "nh": "n_h",
    "n_h": "n_h",
    "M": "m_obs",
    "m_obs": "m_obs",
    "seed": "seed",
    "seeds": "seeds",
    "iterations": "iterations",
    "lr": "lr",
    "width": "width",
    "depth": "depth",
    "activation": "activation",
    "out_dir": "out_dir",
    "record_every": "record_every",
    "n_list": "n_list",
    "sizes": "sizes",
    "n_1": "n_1",
    "gap_threshold": "gap_threshold",
    "error_threshold": "error_threshold",
    "permanent_factor": "permanent_factor",
    "bounds": "bounds",
    "reference": "reference",
    "save": "save",
}


@dataclass
class Config:
    problem: str = "laplace1d"
    lr: float | None = None
    width: int | None = None
    depth: int | None = None
    iterations: int | None = None
    activation: str = "tanh"
    n_f: int | None = None
    n_g: int | None = None
    n_h: int | None = None
    m_obs: int | None = None
    seeds: list[int] = field(default_factory=lambda: [1234])
    ranks: int = 1
    mode: str = "weak"
    out_dir: str | None = None
    record_every: int = 100
    n_list: list[int] = field(default_factory=list)
    sizes: list[int] = field(default_factory=lambda: [1, 2, 4, 8])
    n_1: int | None = None
    gap_threshold: float = 1e-2
    error_threshold: float = 0.3
    permanent_factor: float = 2.0
    bounds: dict | None = None
    reference: str | None = None
    save: str | None = None

    @property
    def seed(self) -> int:
        return self.seeds[0]

    @property
    def dims(self) -> list[int]:
        return default_dims(self.problem, self.width, self.depth)

    def resolved_out_dir(self) -> str:
        if self.out_dir:
            return self.out_dir
        return os.environ.get("PINN_OUT_DIR", "runs")


def default_dims(problem: str, width: int | None = None, depth: int | None = None) -> list[int]:
    kind = PROBLEM_ALIASES.get(problem)
    if kind is None:
        raise ConfigError(f"problem: unknown kind {problem!r}")
    defaults = PROBLEM_DEFAULTS[kind]
    width = defaults["width"] if width is None else width
    depth = defaults["depth"] if depth is None else depth
    d_in, m = _PROBLEM_IO[kind]
    return [d_in] + [width] * depth + [m]


_INT_FIELDS = {"width", "depth", "iterations", "n_f", "n_g", "n_h", "m_obs", "ranks", "record_every", "n_1"}
_FLOAT_FIELDS = {"lr", "gap_threshold", "error_threshold", "permanent_factor"}
_LIST_INT_FIELDS = {"seeds", "n_list", "sizes"}


def _coerce(field_name: str, value):
    try:
        if field_name in _INT_FIELDS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if field_name in _FLOAT_FIELDS:
            return float(value)
        if field_name == "seed":
            return int(value)
        if field_name in _LIST_INT_FIELDS:
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split() if v]
            return [int(v) for v in value]
        return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{field_name}: cannot interpret {value!r}") from exc


def _apply(cfg_values: dict, items: dict, source: str) -> None:
    items = {k: v for k, v in items.items() if v is not None}
    for key, value in items.items():
        target = KEY_MAP.get(key)
        if target is None:
            raise ConfigError(f"{source}: unknown key {key!r}")
        if key == "seed" and "seeds" not in items:
            cfg_values["seeds"] = [_coerce("seed", value)]
            continue
        if key == "seed":
            continue
        cfg_values[target] = _coerce(target, value)


def parse_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Build a validated Config: problem defaults, then file, then overrides."""
    values: dict = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path}: expected a JSON object")
        _apply(values, data, source=path)
    if overrides:
        _apply(values, overrides, source="flags")

    problem = values.get("problem", "laplace1d")
    kind = PROBLEM_ALIASES.get(problem)
    if kind is None:
        raise ConfigError(f"problem: unknown kind {problem!r}; choose from {sorted(set(PROBLEM_ALIASES))}")
    values["problem"] = kind
    defaults = PROBLEM_DEFAULTS[kind]
    for key in ("lr", "width", "depth", "iterations", "n_f", "n_g", "n_h", "m_obs"):
        values.setdefault(key, defaults[key])
        if values[key] is None:
            values[key] = defaults[key]

    known = {f.name for f in fields(Config)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = Config(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: Config) -> None:
    if cfg.lr <= 0:
        raise ConfigError(f"lr: must be positive, got {cfg.lr}")
    if cfg.depth < 1:
        raise ConfigError(f"depth: must be >= 1, got {cfg.depth}")
    if cfg.width < 1:
        raise ConfigError(f"width: must be >= 1, got {cfg.width}")
    if cfg.iterations < 1:
        raise ConfigError(f"iterations: must be >= 1, got {cfg.iterations}")
    if cfg.n_f < 1:
        raise ConfigError(f"N_f: must be >= 1, got {cfg.n_f}")
    for name, value in (("N_g", cfg.n_g), ("N_h", cfg.n_h), ("M", cfg.m_obs)):
        if value < 0:
            raise ConfigError(f"{name}: must be >= 0, got {value}")
    if cfg.ranks < 1:
        raise ConfigError(f"ranks: must be >= 1, got {cfg.ranks}")
    if cfg.mode not in ("weak", "strong"):
        raise ConfigError(f"mode: must be 'weak' or 'strong', got {cfg.mode!r}")
    if cfg.record_every < 1:
        raise ConfigError(f"record_every: must be >= 1, got {cfg.record_every}")
    if not cfg.seeds:
        raise ConfigError("seeds: need at least one seed")
    if cfg.activation not in ("tanh", "identity"):
        raise ConfigError(f"activation: must be 'tanh' or 'identity', got {cfg.activation!r}")
    for name, value in (
        ("gap_threshold", cfg.gap_threshold),
        ("error_threshold", cfg.error_threshold),
        ("permanent_factor", cfg.permanent_factor),
    ):
        if value <= 0:
            raise ConfigError(f"{name}: must be positive, got {value}")
    if any(s < 1 for s in cfg.sizes):
        raise ConfigError(f"sizes: must be positive, got {cfg.sizes}")
    if any(n < 1 for n in cfg.n_list):
        raise ConfigError(f"n_list: must be positive, got {cfg.n_list}")
