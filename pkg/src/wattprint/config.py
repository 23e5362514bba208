"""Config file discovery and environment-variable overrides.

Precedence, lowest to highest: built-in defaults, the config file,
``WATTPRINT_*`` environment variables, explicit flags/arguments. The
config file is YAML; see the README for the documented keys.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Mapping

import yaml

from .tracker import TrackerConfig

logger = logging.getLogger("wattprint.config")

CONFIG_ENV = "WATTPRINT_CONFIG"
CONFIG_FILENAMES = (
    Path("wattprint.yaml"),
    Path.home() / ".config" / "wattprint" / "config.yaml",
)

# Environment variables mirroring the CLI flags.
ENV_KEYS = {
    "WATTPRINT_EPOCHS": ("total_epochs", int),
    "WATTPRINT_PRED_AFTER": ("epochs_before_pred", int),
    "WATTPRINT_MONITOR": ("monitor_epochs", int),
    "WATTPRINT_INTERVAL": ("sampling_interval", float),
    "WATTPRINT_PUE": ("pue", float),
    "WATTPRINT_LOG_DIR": ("log_dir", str),
    "WATTPRINT_EXPERIMENT": ("experiment", str),
    "WATTPRINT_REGION": ("region", str),
    "WATTPRINT_COMPONENTS": ("components", lambda v: tuple(p.strip() for p in v.split(","))),
    "WATTPRINT_TRACE": ("replay_trace", str),
    "WATTPRINT_REPLAY_WINDOW": ("replay_epoch_seconds", float),
    "WATTPRINT_HTTP_TIMEOUT": ("http_timeout", float),
    "WATTPRINT_HTTP_RETRIES": ("http_retries", int),
    "WATTPRINT_NO_NET": ("no_net", lambda v: v.strip().lower() not in ("", "0", "false")),
}

_CONFIG_FIELDS = set(TrackerConfig.__dataclass_fields__)


def load_config_file(explicit: str | Path | None = None) -> dict[str, Any]:
    """Read the first config file found; missing files are not an error."""
    candidates: list[Path] = []
    if explicit is not None:
        candidates.append(Path(explicit))
    elif os.environ.get(CONFIG_ENV):
        candidates.append(Path(os.environ[CONFIG_ENV]))
    else:
        candidates.extend(CONFIG_FILENAMES)
    for candidate in candidates:
        if not candidate.is_file():
            if explicit is not None or os.environ.get(CONFIG_ENV):
                raise FileNotFoundError(f"config file not found: {candidate}")
            continue
        payload = yaml.safe_load(candidate.read_text(encoding="utf-8"))
        if payload is None:
            return {}
        if not isinstance(payload, dict):
            raise ValueError(f"{candidate}: config must be a mapping")
        return payload
    return {}


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    overrides: dict[str, Any] = {}
    for env_key, (field_name, convert) in ENV_KEYS.items():
        raw = environ.get(env_key)
        if raw is None or raw == "":
            continue
        try:
            overrides[field_name] = convert(raw)
        except (TypeError, ValueError):
            logger.warning("ignoring unparseable %s=%r", env_key, raw)
    return overrides


def build_tracker_config(
    *layers: Mapping[str, Any], config_file: str | Path | None = None
) -> TrackerConfig:
    """Merge defaults, config file, environment, and explicit layers.

    Later layers win; keys set to None in a layer do not override. Keys
    that are not TrackerConfig fields are dropped with a warning.
    """
    merged: dict[str, Any] = {}
    for layer in (load_config_file(config_file), env_overrides(), *layers):
        for key, value in layer.items():
            if value is None:
                continue
            if key not in _CONFIG_FIELDS:
                logger.warning("ignoring unknown config key %r", key)
                continue
            merged[key] = value
    if "components" in merged:
        merged["components"] = tuple(merged["components"])
    config = TrackerConfig(**merged)
    config.validate()
    return config
