"""Service configuration: JSON file, EMEDGE_ environment overrides.

Precedence: built-in defaults < config file < environment. Every field of
ServiceConfig can be overridden with EMEDGE_<UPPERCASE_FIELD_NAME>.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError
from .recommender import RecommenderConfig

ENV_PREFIX = "EMEDGE_"


@dataclass
class ServiceConfig:
    site: str = "home"
    user_id: str = "user"
    store_path: str = "emedge-data"
    appliance_spec_file: str = ""      # empty -> bundled default catalog
    replay_file: str = ""              # empty -> no replay source
    replay_realtime: bool = False
    replay_rate_per_s: float = 0.0     # 0 -> as fast as possible
    broker_host: str = ""              # empty -> no external broker
    broker_port: int = 1883
    http_host: str = "127.0.0.1"
    http_port: int = 8321
    static_dir: str = ""               # dashboard assets, optional
    event_buffer: int = 4096
    tariff: float = 0.12
    co2_factor: float = 0.45
    t1_margin_c: float = 1.0
    t2_lux_threshold: float = 350.0
    cooldown_s: int = 1800
    feedback_timeout_s: int = 1800
    suppression_s: int = 86400
    auto_off_on_accept: bool = False

    def recommender_config(self) -> RecommenderConfig:
        return RecommenderConfig(
            tariff=self.tariff,
            co2_factor=self.co2_factor,
            t1_margin_c=self.t1_margin_c,
            t2_lux_threshold=self.t2_lux_threshold,
            cooldown_s=self.cooldown_s,
            feedback_timeout_s=self.feedback_timeout_s,
            suppression_s=self.suppression_s,
            auto_off_on_accept=self.auto_off_on_accept,
        )


def _coerce(name: str, kind: type, raw: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw)
    except ValueError as e:
        raise ConfigurationError(f"bad value for {name}: {e}")


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServiceConfig:
    env = os.environ if env is None else env
    values: dict = {}
    if path:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"config file {path}: expected a JSON object")
        known = {f.name for f in fields(ServiceConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    cfg = ServiceConfig(**values)
    for f in fields(ServiceConfig):
        env_name = ENV_PREFIX + f.name.upper()
        if env_name in env:
            setattr(cfg, f.name, _coerce(env_name, type(getattr(cfg, f.name)), env[env_name]))
    return cfg
