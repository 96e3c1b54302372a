from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Tuple

from src.models.world_state import ObservedObject

RGB = Tuple[int, int, int]


@dataclass(frozen=True, order=True)
class AppearanceSignature:
    color: RGB
    size: Tuple[int, int]

    @classmethod
    def of(cls, obj: ObservedObject) -> "AppearanceSignature":
        return cls(tuple(obj.color), tuple(obj.bbox))

    def __str__(self):
        return f"{','.join(map(str, self.color))}/{self.size[0]}x{self.size[1]}"

    @classmethod
    def parse(cls, text: str) -> "AppearanceSignature":
        color, size = text.split("/")
        w, h = size.split("x")
        return cls(tuple(int(v) for v in color.split(",")), (int(w), int(h)))


class Category(str, Enum):
    AGENT = "agent"
    STATIC = "static"
    MOVING_GOOD = "moving_good"
    MOVING_BAD = "moving_bad"
    AGENT_OBJECT = "agent_object"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Evidence:
    moved: int = 0
    stayed: int = 0
    positive: int = 0
    negative: int = 0
    spawned_by_agent: int = 0

    @property
    def contradictory(self) -> bool:
        return self.positive > 0 and self.negative > 0

    def add(self, **counts) -> "Evidence":
        return replace(self, **{name: getattr(self, name) + value for name, value in counts.items()})


@dataclass
class CategoryModel:
    assignments: Dict[AppearanceSignature, Category] = field(default_factory=dict)
    evidence: Dict[AppearanceSignature, Evidence] = field(default_factory=dict)

    def copy(self) -> "CategoryModel":
        return CategoryModel(dict(self.assignments), dict(self.evidence))

    def resolved(self) -> Dict[AppearanceSignature, Category]:
        return {s: c for s, c in self.assignments.items() if c is not Category.UNKNOWN}


@dataclass(frozen=True)
class TrackedObjects:
    correspondences: Dict[int, int]
    entered: Tuple[int, ...]
    exited: Tuple[int, ...]
    previous: Dict[int, ObservedObject] = field(default_factory=dict, compare=False, repr=False)
    current: Dict[int, ObservedObject] = field(default_factory=dict, compare=False, repr=False)

    def displacement(self, prev_handle: int) -> Tuple[int, int]:
        a = self.previous[prev_handle]
        b = self.current[self.correspondences[prev_handle]]
        return b.x - a.x, b.y - a.y
