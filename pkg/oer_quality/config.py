"""
Run configuration and logging setup for the command-line tool.

Settings resolve in three layers: built-in defaults, an optional YAML file
(keys named like the flag destinations), then flags given on the command line.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import sys
from collections.abc import Mapping
from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

from oer_quality.metadata import ConfigError
from oer_quality.random_forest import ForestHyperparams

# Settings that never influence results and so are not echoed into artifacts.
_RUNTIME_ONLY = ("jobs", "verbose", "config")
_PATHS = ("input", "output", "model", "mapping")


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    config: str | None = None
    input: str | None = None
    output: str | None = None
    format: str | None = None
    benchmark: str = "derive"
    """"derive", "paper", or a path to a benchmark JSON file."""
    model: str | None = None
    trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int = 2
    bootstrap: bool = True
    split: float = 0.8
    seed: int = 42
    whole_input: bool = False
    base_url: str | None = None
    query: str | None = None
    page_size: int = 50
    max_records: int = 10_000
    retry_limit: int = 3
    request_timeout: float = 30.0
    backoff: float = 1.0
    mapping: str | None = None
    low_confidence_below: int = 10
    jobs: int = 1
    verbose: int = 0

    @classmethod
    def resolve(
        cls, command: str, flags: Mapping, config_path: "str | Path | None" = None
    ) -> "RunConfig":
        """Merges defaults, the YAML file at `config_path` and explicit flags.

        Flags whose value is None are treated as not given.
        """
        config = cls(command=command)
        if config_path is not None:
            config = replace(config, config=str(config_path), **load_config_file(config_path))
        given = {k: v for k, v in flags.items() if v is not None and k in _field_names()}
        return replace(config, **given)

    def hyperparams(self) -> ForestHyperparams:
        return ForestHyperparams(
            tree_count=self.trees,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_leaf,
            features_per_split=self.features_per_split,
            seed=self.seed,
            bootstrap=self.bootstrap,
        )

    def to_dict(self) -> dict:
        """The effective settings, minus those that cannot change results."""
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in _RUNTIME_ONLY
        }

    def settings(self) -> dict:
        """`to_dict` without file paths; embedded in models and reports."""
        return {k: v for k, v in self.to_dict().items() if k not in _PATHS}


def _field_names() -> set[str]:
    return {f.name for f in fields(RunConfig)}


def load_config_file(path: "str | Path") -> dict:
    """Reads a YAML mapping of settings; hyphens in keys are accepted.

    Raises:
        ConfigError: If the file is unreadable, not a mapping, or has unknown keys.
    """
    try:
        document = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    if not isinstance(document, Mapping):
        raise ConfigError(f"config file {path} must hold a mapping")
    values = {str(k).replace("-", "_"): v for k, v in document.items()}
    unknown = sorted(set(values) - _field_names() - {"command", "config"})
    if unknown:
        raise ConfigError(f"unknown settings in {path}: {', '.join(unknown)}")
    values.pop("command", None)
    values.pop("config", None)
    return values


def setup_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def write_sidecar(output: "str | Path", config: RunConfig) -> Path:
    """Writes `<output>.meta.json` with the effective config and a timestamp.

    Timestamps live only here so primary outputs stay byte-identical across runs.
    """
    output = Path(output)
    sidecar = output.with_name(output.name + ".meta.json")
    sidecar.write_text(
        json.dumps(
            {
                "command": config.command,
                "config": config.to_dict(),
                "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return sidecar
