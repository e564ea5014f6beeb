"""Run configuration: key = value file, environment overrides, CLI overrides.

Precedence (lowest to highest): built-in defaults, config file, environment
variables prefixed CARCASSWATCH_, explicit overrides.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

ENV_PREFIX = "CARCASSWATCH_"


class ConfigError(ValueError):
    """Unparseable or out-of-domain configuration."""


@dataclass
class RunConfig:
    input: str = ""
    output_dir: str = "out"
    columns: str = ""  # optional column-name map JSON; blank = built-in map
    artifact: str = ""  # fitted artifact path for chart/serve
    level: float = 0.80
    seed: int = 20230102
    host: str = "127.0.0.1"
    port: int = 8823
    max_edge_km: float = 75.0
    extension_km: float = 150.0
    max_evaluations: int = 400
    predictive_draws: int = 500
    band: str = "predictive"
    field_resolution_deg: float = 0.25

    def validate(self) -> "RunConfig":
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must be in (0, 1), got {self.level}")
        if not 1 <= self.port <= 65535:
            raise ConfigError(f"port must be in 1..65535, got {self.port}")
        if self.band not in ("predictive", "latent"):
            raise ConfigError(f"band must be 'predictive' or 'latent', got {self.band!r}")
        for name in ("max_edge_km", "extension_km", "field_resolution_deg"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_evaluations", "predictive_draws"):
            if not getattr(self, name) >= 1:
                raise ConfigError(f"{name} must be at least 1")
        return self


def parse_config_text(text: str) -> dict:
    """key = value lines; # starts a comment; values keep inner spaces."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip().strip("\"'")
    return out


def _coerce(name: str, value: str, target_type: type):
    try:
        if target_type is bool:
            return value.lower() in ("1", "true", "yes", "on")
        return target_type(value)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name}={value!r} as {target_type.__name__}") from exc


def load_config(
    path: str | Path | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    env = os.environ if env is None else env
    values: dict = {}
    field_types = {f.name: f.type for f in fields(RunConfig)}
    concrete = {"input": str, "output_dir": str, "columns": str, "artifact": str,
                "level": float, "seed": int, "host": str, "port": int,
                "max_edge_km": float, "extension_km": float,
                "max_evaluations": int, "predictive_draws": int, "band": str,
                "field_resolution_deg": float}
    del field_types

    if path:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in parse_config_text(path.read_text()).items():
            if key not in concrete:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw, concrete[key])

    for key, typ in concrete.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, env[env_key], typ)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in concrete:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value if not isinstance(value, str) else _coerce(key, value, concrete[key])

    return RunConfig(**values).validate()
