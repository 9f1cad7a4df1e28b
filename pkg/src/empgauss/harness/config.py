"""Experiment configuration, loadable from a YAML (or JSON) file.

Example::

    families:
      - {family: iid}
      - {family: ou, alpha: 1.0}
      - {family: lrd, D: 0.5}
    n_list: [100, 1000, 10000]
    replications: 1000
    master_seed: 12345
    epsilon: epsilon_star        # or a number in (0, 1/2]
    tol: 1.0e-3
    tail_thresholds: [0.05, 0.1]
    delta_targets: [n, 4n, 16n]  # tightness study; plain numbers also work
    out: results
    format: csv
    workers: 1
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..covmodels import FamilySpec
from ..errors import ConfigError, InvalidParameter

DEFAULT_SEED = 20200101


@dataclass
class ExperimentConfig:
    families: list[FamilySpec] = field(default_factory=lambda: [FamilySpec.iid()])
    n_list: list[int] = field(default_factory=lambda: [100, 1000])
    replications: int = 500
    master_seed: int = DEFAULT_SEED
    epsilon: Any = "epsilon_star"
    tol: float = 1e-3
    tail_thresholds: list[float] = field(default_factory=lambda: [0.1])
    tail_grid_points: int = 512
    delta_targets: list[Any] = field(default_factory=lambda: ["n", "4n", "16n"])
    gamma: float = 2.0
    i_max: int = 20
    out: Path = Path("results")
    format: str = "csv"
    workers: int = 1
    block_size: int = 50
    plots: bool = True
    keep_values: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.families:
            raise ConfigError("at least one family is required")
        self.families = [f if isinstance(f, FamilySpec) else _family(f) for f in self.families]
        try:
            self.n_list = [int(n) for n in self.n_list]
        except (TypeError, ValueError):
            raise ConfigError("n_list must contain integers") from None
        if not self.n_list or min(self.n_list) < 1:
            raise ConfigError("n_list must be nonempty with positive entries")
        if int(self.replications) < 2:
            raise ConfigError("replications must be at least 2")
        self.replications = int(self.replications)
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        self.master_seed = int(self.master_seed)
        if self.epsilon != "epsilon_star":
            try:
                eps = float(self.epsilon)
            except (TypeError, ValueError):
                raise ConfigError("epsilon must be 'epsilon_star' or a number") from None
            if not 0 < eps <= 0.5:
                raise ConfigError("fixed epsilon must lie in (0, 1/2]")
            self.epsilon = eps
        if not float(self.tol) > 0:
            raise ConfigError("tol must be positive")
        self.tail_thresholds = [float(e) for e in self.tail_thresholds]
        if any(not 0 < e < 1 for e in self.tail_thresholds):
            raise ConfigError("tail thresholds must lie in (0, 1)")
        if int(self.tail_grid_points) < 2:
            raise ConfigError("tail_grid_points must be at least 2")
        if not float(self.gamma) > 1:
            raise ConfigError("gamma must exceed 1")
        if int(self.i_max) < 1:
            raise ConfigError("i_max must be positive")
        for d in self.delta_targets:
            resolve_delta(d, 1)
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if int(self.workers) < 1:
            raise ConfigError("workers must be positive")
        if int(self.block_size) < 1:
            raise ConfigError("block_size must be positive")
        self.out = Path(self.out)

    def echo(self) -> dict:
        """Plain-data view for reports (output settings excluded)."""
        d = {}
        for f in dataclasses.fields(self):
            if f.name in ("out", "workers", "plots"):
                continue
            v = getattr(self, f.name)
            if f.name == "families":
                v = [s.to_dict() for s in v]
            d[f.name] = v
        return d


def _family(d) -> FamilySpec:
    if isinstance(d, str):
        d = {"family": d}
    if not isinstance(d, Mapping):
        raise ConfigError(f"bad family entry {d!r}")
    try:
        return FamilySpec.from_dict(d)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from None


def resolve_delta(target, n: int) -> float:
    """A Δ target: a number, or a multiple of n written like ``4n``."""
    if isinstance(target, (int, float)) and not isinstance(target, bool):
        value = float(target)
    else:
        s = str(target).strip()
        try:
            value = float(s[:-1] or 1) * n if s.endswith("n") else float(s)
        except ValueError:
            raise ConfigError(f"bad delta target {target!r}") from None
    if value < 0:
        raise ConfigError("delta targets must be nonnegative")
    return value


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping")
    return config_from_mapping(data, **overrides)


def config_from_mapping(data: Mapping, **overrides) -> ExperimentConfig:
    data = dict(data)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
