"""Experiment configuration: JSON files with command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

ALGOS = ("dqn", "sac", "nsac", "dqn-repeat", "sac-repeat", "dqn-ip", "sac-ip", "nsac-ip")
ENVS = ("linetrack", "twoway-mini")
EVAL_SEED_OFFSET = 10_007


@dataclass(frozen=True)
class ExperimentConfig:
    algo: str = "nsac"
    env: str = "twoway-mini"
    complexity: str = "simple"
    seeds: int = 5
    first_seed: int = 0
    total_steps: int = 100_000
    eval_interval: int = 5_000
    eval_episodes: int = 20
    eval_mode: str = "sample"
    eval_seed_offset: int = EVAL_SEED_OFFSET
    repeats: tuple = (1, 2, 4, 8)
    penalty: float = -0.05
    agent_params: dict = field(default_factory=dict)
    env_params: dict = field(default_factory=dict)
    output_dir: str = "runs"
    save_checkpoints: bool = True
    save_buffer: bool = False

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.env not in ENVS:
            raise ValueError(f"unknown env {self.env!r}; choose from {ENVS}")
        if self.complexity not in ("simple", "complex"):
            raise ValueError("complexity must be 'simple' or 'complex'")
        if self.eval_mode not in ("sample", "greedy"):
            raise ValueError("eval_mode must be 'sample' or 'greedy'")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be positive")
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        if self.total_steps < 0 or self.eval_episodes < 1:
            raise ValueError("total_steps must be >= 0 and eval_episodes >= 1")

    @property
    def seed_list(self) -> list:
        return list(range(self.first_seed, self.first_seed + self.seeds))

    def eval_seed(self, seed: int) -> int:
        return seed + self.eval_seed_offset

    def to_dict(self) -> dict:
        d = asdict(self)
        d["repeats"] = list(self.repeats)
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "repeats" in data:
            data["repeats"] = tuple(data["repeats"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **changes) -> "ExperimentConfig":
        """Copy with non-None ``changes`` applied; dict fields are merged."""
        changes = {k: v for k, v in changes.items() if v is not None}
        for key in ("agent_params", "env_params"):
            if key in changes:
                changes[key] = {**getattr(self, key), **changes[key]}
        return replace(self, **changes)
