"""Run configuration: file loading (TOML or JSON) and validation."""
from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import PreconditionError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(PreconditionError):
    pass


@dataclass
class RunConfig:
    r: float = 1.0
    R: float = 2.0
    m_max: int = 32
    mu_max: int = 32
    k_max: float = 60.0
    k_nodes_per_unit: int = 64
    b: float = 6.0
    h: float = 0.05
    eps0: float = 0.3
    seed: int = 0
    threads: Optional[int] = None
    output_dir: str = "torwave_out"
    options: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if not (0 < self.r < self.R):
            raise ConfigError(f"need 0 < r < R, got r={self.r}, R={self.R}")
        if self.m_max < 0 or self.mu_max < 0:
            raise ConfigError("m_max and mu_max must be non-negative")
        if not (self.k_max > 0 and self.k_nodes_per_unit > 0):
            raise ConfigError("k_max and k_nodes_per_unit must be positive")
        if self.b < 5:
            raise ConfigError(f"b must be at least 5, got {self.b}")
        if not (0 < self.h < 1):
            raise ConfigError(f"h must lie in (0, 1), got {self.h}")
        if not self.eps0 > 0:
            raise ConfigError("eps0 must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_KNOWN = {f.name for f in fields(RunConfig)}


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        raw = json.loads(text.decode())
    else:
        try:
            raw = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    flat = {}
    for key, val in raw.items():
        if isinstance(val, dict) and key in ("geometry", "truncation", "cutoffs", "run"):
            flat.update(val)
        else:
            flat[key] = val
    return flat


def build_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the config file, then explicit overrides, then TORWAVE_OUTPUT_DIR."""
    values = {}
    if path is not None:
        values.update(load_config_file(path))
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    options = {k: values.pop(k) for k in list(values) if k not in _KNOWN}
    cfg = RunConfig(**values)
    cfg.options.update(options)
    env_dir = os.environ.get("TORWAVE_OUTPUT_DIR")
    if env_dir:
        cfg.output_dir = env_dir
    return cfg.validate()
