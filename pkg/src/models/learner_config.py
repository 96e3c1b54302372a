from dataclasses import dataclass, fields
from typing import Any, Dict, Tuple

from src.models.errors import ConfigError


def _pick(cls, values: Dict[str, Any]) -> Dict[str, Any]:
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in values.items() if k in names}


@dataclass(frozen=True)
class PerceptionConfig:
    n_static: int = 10
    agent_object_min: int = 1
    max_jump: int = 2

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "PerceptionConfig":
        return cls(**_pick(cls, config.get("perception", {})))


@dataclass(frozen=True)
class IdentifyConfig:
    window: int = 50
    trials: int = 10
    motion_threshold: float = 0.8
    fire_presses: int = 5
    fire_threshold: int = 3

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "IdentifyConfig":
        return cls(**_pick(cls, config.get("agent_id", {})))


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    decay_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.decay_steps < 1:
            raise ConfigError("decay_steps must be >= 1")

    def epsilon(self, t: int) -> float:
        return self.epsilon_start - (self.epsilon_start - self.epsilon_end) * min(t / self.decay_steps, 1.0)

    @classmethod
    def from_config(cls, config: Dict[str, Any], epochs: int = 0, seed: int = 0) -> "LearnerConfig":
        section = config.get("qlearner", {})
        decay = max(1, int(round(section.get("decay_fraction", 0.5) * epochs)))
        return cls(decay_steps=decay, seed=seed, **_pick(cls, {k: v for k, v in section.items() if k not in ("seed", "decay_steps")}))


@dataclass(frozen=True)
class DQNConfig:
    hidden: Tuple[int, ...] = (128, 64)
    batch_size: int = 32
    capacity: int = 50000
    warmup: int = 32
    lr: float = 1e-3
    gamma: float = 0.95
    target_sync: int = 1000
    cell_px: int = 1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    decay_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.warmup < self.batch_size:
            raise ConfigError("warmup must be at least one batch")
        if self.capacity < self.batch_size:
            raise ConfigError("replay capacity must hold one batch")

    def epsilon(self, t: int) -> float:
        return self.epsilon_start - (self.epsilon_start - self.epsilon_end) * min(t / self.decay_steps, 1.0)

    @classmethod
    def from_config(cls, config: Dict[str, Any], epochs: int = 0, seed: int = 0) -> "DQNConfig":
        section = dict(config.get("dqn", {}))
        if "hidden" in section:
            section["hidden"] = tuple(section["hidden"])
        decay_fraction = config.get("qlearner", {}).get("decay_fraction", 0.5)
        decay = max(1, int(round(decay_fraction * epochs)))
        return cls(decay_steps=decay, seed=seed, **_pick(cls, {k: v for k, v in section.items() if k not in ("seed", "decay_steps")}))
