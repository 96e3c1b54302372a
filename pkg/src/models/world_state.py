from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from src.models.game_spec import GameSpec

Vector = Tuple[float, float]


class Status(str, Enum):
    RUNNING = "running"
    WON = "won"
    LOST = "lost"


@dataclass(frozen=True)
class ObjectInstance:
    instance_id: int
    class_id: str
    position: Tuple[int, int]
    bbox: Tuple[int, int]
    color: Tuple[int, int, int]
    velocity: Vector = (0.0, 0.0)


@dataclass(frozen=True)
class ObservedObject:
    """What downstream learners may see of an object: appearance and motion, never its class."""

    handle: int
    position: Tuple[int, int]
    bbox: Tuple[int, int]
    color: Tuple[int, int, int]
    velocity: Vector = (0.0, 0.0)

    @property
    def signature(self):
        return self.color, self.bbox

    @property
    def x(self) -> int:
        return self.position[0]

    @property
    def y(self) -> int:
        return self.position[1]


class EventKind(str, Enum):
    CONTACT = "contact"
    SPAWN = "spawn"
    DESPAWN = "despawn"


@dataclass(frozen=True)
class GameEvent:
    kind: EventKind
    first: int
    second: Optional[int] = None
    reward: int = 0


@dataclass(frozen=True)
class WorldState:
    spec: GameSpec = field(compare=False, repr=False)
    spec_name: str
    objects: Tuple[ObjectInstance, ...]
    score: int
    level_index: int
    step_count: int
    rng_state: Tuple[int, ...]
    status: Status = Status.RUNNING
    next_instance_id: int = 0
    # marching direction per class and player contacts per class, as sorted pairs
    march_dirs: Tuple[Tuple[str, int], ...] = ()
    collected: Tuple[Tuple[str, int], ...] = ()

    def player(self) -> Optional[ObjectInstance]:
        player_class = self.spec.player_class
        return next((o for o in self.objects if o.class_id == player_class), None)

    def count(self, class_id: str) -> int:
        return sum(1 for o in self.objects if o.class_id == class_id)


@dataclass(frozen=True)
class StepOutcome:
    reward: int
    status_after: Status
    events: Tuple[GameEvent, ...] = ()

    @property
    def contacts(self) -> Tuple[GameEvent, ...]:
        return tuple(e for e in self.events if e.kind is EventKind.CONTACT)


@dataclass(frozen=True)
class PixelFrame:
    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError(f"expected {self.width * self.height * 3} bytes, got {len(self.pixels)}")
