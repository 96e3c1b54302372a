from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from src.models.errors import ConfigError
from src.models.game_spec import VariantName


class Algorithm(str, Enum):
    QLEARN = "qlearn"
    DQN = "dqn"
    RANDOM = "random"


@dataclass(frozen=True)
class ExperimentConfig:
    game: str
    variant: VariantName = VariantName.BASE
    algorithm: Algorithm = Algorithm.QLEARN
    epochs: int = 500000
    eval_runs: int = 20
    eval_interval: int = 10000
    seeds: Tuple[int, ...] = (0,)
    k: Optional[int] = None
    expert_wide: bool = False
    output_dir: Optional[str] = None
    warmup_steps: int = 2000
    eval_seed_base: int = 10000
    variant_seed: int = 7

    def __post_init__(self):
        if self.eval_runs < 1:
            raise ConfigError(f"eval_runs must be >= 1, got {self.eval_runs}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.eval_interval < 1:
            raise ConfigError(f"eval_interval must be >= 1, got {self.eval_interval}")
        if not self.seeds:
            raise ConfigError("at least one training seed is required")

    @property
    def train_variant(self) -> VariantName:
        # policies are always trained on the unmodified game
        return VariantName.BASE

    @property
    def cell_name(self) -> str:
        return f"{self.game}__{self.variant.value}__{self.algorithm.value}"

    def eval_seeds(self) -> List[int]:
        return [self.eval_seed_base + i for i in range(self.eval_runs)]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["variant"] = self.variant.value
        data["algorithm"] = self.algorithm.value
        data["seeds"] = list(self.seeds)
        return data

    @classmethod
    def from_config(cls, config: Dict[str, Any], game: str, **overrides) -> "ExperimentConfig":
        harness = config.get("harness", {})
        algorithm = Algorithm(overrides.pop("algorithm", None) or Algorithm.QLEARN)
        epochs_key = "dqn_epochs" if algorithm is Algorithm.DQN else "epochs"
        values = dict(
            epochs=harness.get(epochs_key, 500000),
            eval_runs=harness.get("eval_runs", 20),
            eval_interval=harness.get("eval_interval", 10000),
            seeds=tuple(harness.get("seeds", [0])),
            warmup_steps=harness.get("warmup_steps", 2000),
            eval_seed_base=harness.get("eval_seed_base", 10000),
            variant_seed=harness.get("variant_seed", 7),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "variant" in values:
            values["variant"] = VariantName(values["variant"])
        values["seeds"] = tuple(values["seeds"])
        return cls(game=game, algorithm=algorithm, **values)


@dataclass(frozen=True)
class EvalPoint:
    epoch: int
    scores: Tuple[float, ...]
    normalized: Tuple[float, ...]
    mean_score: float
    mean_normalized: float
    novel_state_fraction: float = 0.0
    # mean normalized score of each training seed
    per_seed: Tuple[float, ...] = ()


@dataclass
class RunRecord:
    config: ExperimentConfig
    points: List[EvalPoint] = field(default_factory=list)
    skipped: bool = False
    reason: str = ""
    max_score: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def final(self) -> Optional[EvalPoint]:
        return self.points[-1] if self.points else None


VARIANT_ORDER = (VariantName.BASE, VariantName.MOD_POSITION, VariantName.MOD_COLORSIZE, VariantName.MOD_IMAGE)
