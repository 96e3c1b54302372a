import logging
import math
from typing import Dict, Iterable, Mapping, Optional, Sequence

from src.models.categories import AppearanceSignature, Category, CategoryModel
from src.models.encoded_state import EncodedState, EncoderConfig
from src.models.errors import ConfigError, DimensionMismatch
from src.models.world_state import ObservedObject
from src.services.perception import classify

logger = logging.getLogger(__name__)

DEFAULT_MAX_K = 8


def builtin_encoder_configs() -> Dict[str, EncoderConfig]:
    return {
        "myaliensv1": EncoderConfig(k=4, planes=(Category.MOVING_BAD,)),
        "myaliensv2": EncoderConfig(k=4, planes=(Category.MOVING_BAD, Category.MOVING_GOOD)),
        # two-cell cars need one more step of warning than single-cell objects
        "roadrash": EncoderConfig(k=2, planes=(Category.MOVING_BAD,), slack=2),
        "spaceinvaders": EncoderConfig(k=4, planes=(Category.MOVING_BAD,), has_bullet_bit=True),
    }


def config_for(game: str, k: Optional[int] = None, expert_wide: bool = False, max_k: int = DEFAULT_MAX_K,
               slack: Optional[int] = None) -> EncoderConfig:
    """Built-in encoder for `game`, optionally widened to half-width `k`."""
    configs = builtin_encoder_configs()
    base = configs.get(game, EncoderConfig(k=4))
    k = base.k if k is None else k
    if k > max_k and not expert_wide:
        raise ConfigError(f"k={k} exceeds {max_k}; pass --expert-wide to allow it")
    return EncoderConfig(
        k=k,
        planes=base.planes,
        has_bullet_bit=base.has_bullet_bit,
        agent_steps_per_cell=base.agent_steps_per_cell,
        slack=base.slack if slack is None else slack,
    )


def _round(value: float) -> int:
    return int(math.floor(value + 0.5))


def _arrivals(obj: ObservedObject, agent: ObservedObject, k: int):
    """(offset, time) pairs at which `obj` reaches a column within k of the agent."""
    ox, oy = obj.position
    ax, ay = agent.position
    vx, vy = obj.velocity
    if vy != 0:
        # vertical movers only count while heading towards the agent's row
        if (vy > 0 and oy <= ay) or (vy < 0 and oy >= ay):
            t = (ay - oy) / vy
            yield _round(ox + vx * t) - ax, t
        return
    for i in range(-k, k + 1):
        c = ax + i
        if ox == c:
            yield i, 0.0
        elif vx != 0 and (c - ox) / vx >= 0:
            yield i, (c - ox) / vx


def encode(objects: Mapping[Category, Sequence[ObservedObject]], agent: ObservedObject, grid_width: int,
           config: EncoderConfig) -> EncodedState:
    """Threat bits per plane around the agent's anchor column, plus edge and bullet bits."""
    if not 0 <= agent.x < grid_width:
        raise DimensionMismatch(f"agent column {agent.x} outside a grid {grid_width} wide")
    k, width = config.k, config.width
    planes = []
    for category in config.planes:
        bits = [False] * width
        for obj in objects.get(category, ()):
            for i, t in _arrivals(obj, agent, k):
                if abs(i) <= k and t <= abs(i) * config.agent_steps_per_cell + config.slack:
                    bits[i + k] = True
        planes.append(tuple(bits))
    boundary = (agent.x == 0, agent.x + agent.bbox[0] == grid_width)
    bullet = bool(objects.get(Category.AGENT_OBJECT)) if config.has_bullet_bit else None
    return EncodedState(orientation_bits=tuple(planes), boundary_bits=boundary, bullet_bit=bullet)


def state_key(es: EncodedState) -> int:
    """Pack bits least-significant first: planes in order, offsets ascending, left edge, right edge, bullet."""
    key = 0
    for index, bit in enumerate(es.bits()):
        if bit:
            key |= 1 << index
    return key


def unpack_state(key: int, config: EncoderConfig) -> EncodedState:
    if key < 0 or key >= 1 << config.total_bits:
        raise DimensionMismatch(f"key {key} does not fit {config.total_bits} bits")
    bits = [bool(key >> index & 1) for index in range(config.total_bits)]
    width = config.width
    planes = tuple(tuple(bits[p * width:(p + 1) * width]) for p in range(len(config.planes)))
    offset = len(config.planes) * width
    bullet = bits[offset + 2] if config.has_bullet_bit else None
    return EncodedState(orientation_bits=planes, boundary_bits=(bits[offset], bits[offset + 1]), bullet_bit=bullet)


def group_by_category(objects: Iterable[ObservedObject], model: CategoryModel) -> Dict[Category, list]:
    """Bucket objects by their learned category; unresolved objects count as threats."""
    groups: Dict[Category, list] = {}
    for obj in objects:
        category = classify(AppearanceSignature.of(obj), model)
        if category is Category.UNKNOWN:
            category = Category.MOVING_BAD
        groups.setdefault(category, []).append(obj)
    return groups


class StateEncoder:
    """Observation -> state key, given a category model and the agent's signature."""

    def __init__(self, config: EncoderConfig, grid_width: int, agent_signature: AppearanceSignature):
        self.config = config
        self.grid_width = grid_width
        self.agent_signature = agent_signature

    def encode_observation(self, objects: Sequence[ObservedObject], model: CategoryModel) -> Optional[EncodedState]:
        agent = next((o for o in objects if AppearanceSignature.of(o) == self.agent_signature), None)
        if agent is None:
            return None
        others = [o for o in objects if o.handle != agent.handle]
        return encode(group_by_category(others, model), agent, self.grid_width, self.config)

    def key(self, objects: Sequence[ObservedObject], model: CategoryModel) -> Optional[int]:
        es = self.encode_observation(objects, model)
        return None if es is None else state_key(es)
