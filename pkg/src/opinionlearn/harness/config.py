"""Experiment configuration and its YAML file form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..bandit import BanditConfig
from ..dynamics import ModelGenConfig
from ..learners import LearnerConfig

ALGORITHMS = ("IE", "eG", "RS", "OLS", "SS", "GPR", "IEp", "eGp")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelGenConfig = ModelGenConfig()
    horizons: tuple[int, ...] = (10, 15, 20)
    n_graphs: int = 10
    bandit: BanditConfig = BanditConfig()
    learner: LearnerConfig = LearnerConfig()
    algorithms: tuple[str, ...] = ALGORITHMS
    eval_pairs: int = 50
    seed: int = 0
    out: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", tuple(int(T) for T in self.horizons))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.horizons or min(self.horizons) < 2:
            raise ValueError("horizons must be at least 2")
        if self.bandit.t_split is not None and self.bandit.t_split >= min(self.horizons):
            raise ValueError("t_split must be below every horizon")
        if self.n_graphs < 1 or self.eval_pairs < 1:
            raise ValueError("n_graphs and eval_pairs must be positive")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def max_horizon(self) -> int:
        return max(self.horizons)


def _build(cls, data: dict[str, Any] | None, section: str):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown keys in '{section}': {sorted(unknown)}")
    if "counts" in data:
        data["counts"] = tuple(data["counts"])
    return cls(**data)


def config_from_dict(d: dict[str, Any]) -> ExperimentConfig:
    d = dict(d or {})
    sub = {
        "model": _build(ModelGenConfig, d.pop("model", None), "model"),
        "bandit": _build(BanditConfig, d.pop("bandit", None), "bandit"),
        "learner": _build(LearnerConfig, d.pop("learner", None), "learner"),
    }
    return _build(ExperimentConfig, {**d, **sub}, "top level")


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
        return v
    return plain(cfg)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return config_from_dict(yaml.safe_load(Path(path).read_text()) or {})


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
