from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

from src.models.categories import AppearanceSignature


class KeyAction(str, Enum):
    MOVE_LEFT = "MoveLeft"
    MOVE_RIGHT = "MoveRight"
    MOVE_UP = "MoveUp"
    MOVE_DOWN = "MoveDown"
    FIRE = "Fire"
    NO_EFFECT = "NoEffect"


DISPLACEMENT_ACTIONS = {
    (-1, 0): KeyAction.MOVE_LEFT,
    (1, 0): KeyAction.MOVE_RIGHT,
    (0, -1): KeyAction.MOVE_UP,
    (0, 1): KeyAction.MOVE_DOWN,
}


@dataclass(frozen=True)
class AgentProfile:
    signature: AppearanceSignature
    instance_handle: Optional[int] = None
    key_map: Dict[str, KeyAction] = field(default_factory=dict, hash=False)

    def with_key_map(self, key_map: Dict[str, KeyAction]) -> "AgentProfile":
        return replace(self, key_map=dict(key_map))

    def fire_keys(self) -> Tuple[str, ...]:
        return tuple(k for k, a in self.key_map.items() if a is KeyAction.FIRE)

    def render_key_map(self) -> str:
        return "\n".join(f"{key:>8} -> {action.value}" for key, action in self.key_map.items())


class BiasStage(str, Enum):
    UNIQUENESS = "Uniqueness"
    PERMANENCE = "Permanence"
    MOTION_BINDING = "MotionBinding"


@dataclass(frozen=True)
class BiasReport:
    bias_used: BiasStage
    candidates_after_each_stage: Tuple[Tuple[BiasStage, FrozenSet[AppearanceSignature]], ...]

    def sizes(self) -> List[int]:
        return [len(c) for _, c in self.candidates_after_each_stage]

    def render(self) -> str:
        lines = []
        for stage, candidates in self.candidates_after_each_stage:
            names = ", ".join(str(s) for s in sorted(candidates)) or "-"
            lines.append(f"{stage.value:<14} {len(candidates):>3}  {names}")
        lines.append(f"agent identified by {self.bias_used.value}")
        return "\n".join(lines)
