"""Flat TOML run configuration.

Keys are the long CLI flag names with dashes replaced by underscores, e.g.

    weight = "fermi"
    alpha = 1.0
    s = 2.0
    y_range = [-2.0, 2.0]
    thresholds = { order_min = 1.7 }

Values from the command line override the file.
"""
from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        data = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for key, value in data.items():
        if isinstance(value, dict) and key != "thresholds":
            raise ConfigError(f"config must be flat; [{key}] tables are not allowed")
    return data
