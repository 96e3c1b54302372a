from dataclasses import dataclass
from typing import Optional, Tuple

from src.models.categories import Category
from src.models.errors import ConfigError

PLANE_CATEGORIES = (Category.MOVING_BAD, Category.MOVING_GOOD)


@dataclass(frozen=True)
class EncoderConfig:
    k: int
    planes: Tuple[Category, ...] = (Category.MOVING_BAD,)
    has_bullet_bit: bool = False
    agent_steps_per_cell: int = 1
    slack: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.planes:
            raise ConfigError("at least one category plane is required")
        for plane in self.planes:
            if plane not in PLANE_CATEGORIES:
                raise ConfigError(f"{plane.value} cannot be an orientation plane")
        if len(set(self.planes)) != len(self.planes):
            raise ConfigError("orientation planes must be distinct")

    @property
    def width(self) -> int:
        return 2 * self.k + 1

    @property
    def total_bits(self) -> int:
        return len(self.planes) * self.width + 2 + (1 if self.has_bullet_bit else 0)


@dataclass(frozen=True)
class EncodedState:
    orientation_bits: Tuple[Tuple[bool, ...], ...]
    boundary_bits: Tuple[bool, bool]
    bullet_bit: Optional[bool] = None

    def bits(self) -> Tuple[bool, ...]:
        """Flat bit sequence in key order."""
        flat = [b for plane in self.orientation_bits for b in plane]
        flat.extend(self.boundary_bits)
        if self.bullet_bit is not None:
            flat.append(self.bullet_bit)
        return tuple(flat)

    def render(self) -> str:
        planes = " | ".join("".join("1" if b else "0" for b in plane) for plane in self.orientation_bits)
        edges = "".join("1" if b else "0" for b in self.boundary_bits)
        bullet = "" if self.bullet_bit is None else f" bullet={int(self.bullet_bit)}"
        return f"[{planes}] edges={edges}{bullet}"
