"""Run configuration: defaults, JSON files and flag overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace

from .distributions import ModelParams, validate_model
from .errors import ConfigError, GwicoalError

DEFAULT_OFFSPRING = (0.5, 0.0, 0.5)
DEFAULT_IMMIGRATION = (0.5, 0.5)
DEFAULT_U_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)
DEFAULT_N_GRID = (64, 128, 256, 512)
SEED_ENV_VAR = "GWICOAL_SEED"


@dataclass(frozen=True)
class ExperimentConfig:
    """One run's worth of knobs.  Field names double as JSON keys."""

    offspring: tuple = DEFAULT_OFFSPRING
    immigration: tuple = DEFAULT_IMMIGRATION
    n: int = 256
    replicates: int = 20_000
    u_grid: tuple = DEFAULT_U_GRID
    seed: int | None = None
    epsilon: float = 1e-6
    slack: float = 0.03
    limit_draws: int = 200_000
    n_grid: tuple = DEFAULT_N_GRID
    threads: int = 1
    output_dir: str = "out"
    particle_cap: int = 10**8
    history_cap: int = 2_000_000
    exact_n: int = 2

    _SEQUENCE_FIELDS = ("offspring", "immigration", "u_grid", "n_grid")
    _INT_FIELDS = (
        "n", "replicates", "limit_draws", "threads",
        "particle_cap", "history_cap", "exact_n",
    )
    _FLOAT_FIELDS = ("epsilon", "slack")

    def params(self) -> ModelParams:
        try:
            return validate_model(self.offspring, self.immigration)
        except GwicoalError as exc:
            raise ConfigError(f"model check failed: {exc}") from exc

    def resolved_seed(self, override: int | None = None) -> int:
        """Explicit flag beats the config file beats the environment beats 0."""
        if override is not None:
            return int(override)
        if self.seed is not None:
            return int(self.seed)
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                return int(env)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
        return 0

    def override(self, **updates) -> "ExperimentConfig":
        """Copy with the non-None entries applied and re-coerced."""
        cleaned = {k: v for k, v in updates.items() if v is not None}
        return _coerce(replace(self, **cleaned)) if cleaned else self


def _coerce(cfg: ExperimentConfig) -> ExperimentConfig:
    updates: dict = {}
    for name in ExperimentConfig._SEQUENCE_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
            raise ConfigError(f"{name} must be a sequence of numbers")
        try:
            updates[name] = tuple(float(x) for x in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} must contain only numbers") from exc
    if any(not x.is_integer() for x in updates["n_grid"]):
        raise ConfigError("n_grid must contain whole numbers")
    updates["n_grid"] = tuple(int(x) for x in updates["n_grid"])
    for name in ExperimentConfig._INT_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        updates[name] = int(value)
    for name in ExperimentConfig._FLOAT_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        updates[name] = float(value)
    if cfg.seed is not None and not isinstance(cfg.seed, int):
        raise ConfigError(f"seed must be an integer or null, got {cfg.seed!r}")
    if not isinstance(cfg.output_dir, str):
        raise ConfigError(f"output_dir must be a string, got {cfg.output_dir!r}")
    return replace(cfg, **updates)


def load_config(path: str | None = None, **overrides) -> ExperimentConfig:
    """Build a config from an optional JSON file plus keyword overrides.

    Unknown keys in the file are an error rather than a silent ignore; a typo
    in a knob name should not quietly run the defaults.
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = _coerce(ExperimentConfig(**data))
    return cfg.override(**overrides)
