import hashlib
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.models.errors import InvalidAction, LevelOutOfRange, TerminalStateError
from src.models.game_spec import GameSpec, KillMode, Renderer, RewardKind, RuleKind, WinKind
from src.models.world_state import (
    EventKind,
    GameEvent,
    ObjectInstance,
    ObservedObject,
    PixelFrame,
    Status,
    StepOutcome,
    WorldState,
)

logger = logging.getLogger(__name__)


def _initial_velocity(spec: GameSpec, level: int, class_id: str, march_dir: int = 1) -> Tuple[float, float]:
    for rule in spec.rules_by_level[level]:
        if rule.class_id != class_id:
            continue
        if rule.kind in (RuleKind.FALL, RuleKind.LANE_ADVANCE):
            return 0.0, float(rule.param("speed", 1))
        if rule.kind is RuleKind.RISE:
            return 0.0, -float(rule.param("speed", 1))
        if rule.kind is RuleKind.MARCH:
            return march_dir * rule.param("dx", 1) / rule.param("period", 1), 0.0
    return 0.0, 0.0


def _fits(spec: GameSpec, class_id: str, x: int, y: int) -> bool:
    w, h = spec.class_def(class_id).hitbox
    return 0 <= x and 0 <= y and x + w <= spec.grid_width and y + h <= spec.grid_height


def _overlap(spec: GameSpec, a: ObjectInstance, b: ObjectInstance) -> bool:
    aw, ah = spec.class_def(a.class_id).hitbox
    bw, bh = spec.class_def(b.class_id).hitbox
    (ax, ay), (bx, by) = a.position, b.position
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def reset(spec: GameSpec, level: int, seed: int, score: int = 0) -> WorldState:
    """Place the objects of one level. `score` carries the running total of a multi-level episode."""
    if not 0 <= level < len(spec.levels):
        raise LevelOutOfRange(f"{spec.name} has {len(spec.levels)} levels, asked for {level}")
    objects = []
    for instance_id, p in enumerate(spec.levels[level].placements):
        cls = spec.class_def(p.class_id)
        objects.append(ObjectInstance(
            instance_id=instance_id,
            class_id=p.class_id,
            position=(p.x, p.y),
            bbox=cls.size,
            color=cls.color,
            velocity=_initial_velocity(spec, level, p.class_id),
        ))
    march_dirs = tuple(sorted((r.class_id, 1) for r in spec.dynamics_rules if r.kind is RuleKind.MARCH))
    return WorldState(
        spec=spec,
        spec_name=spec.name,
        objects=tuple(objects),
        score=score,
        level_index=level,
        step_count=0,
        rng_state=(int(seed), level),
        next_instance_id=len(objects),
        march_dirs=march_dirs,
    )


class _StepBuilder:
    """Mutable scratch space for one tick; the public step() stays a pure function."""

    def __init__(self, state: WorldState):
        self.state = state
        self.spec = state.spec
        self.objects: Dict[int, ObjectInstance] = {o.instance_id: o for o in state.objects}
        self.fresh = set()
        self.events: List[GameEvent] = []
        self.next_id = state.next_instance_id
        self.march_dirs = dict(state.march_dirs)
        self.collected = dict(state.collected)

    def of_class(self, class_id: str, include_fresh: bool = False) -> List[ObjectInstance]:
        return [o for o in self.objects.values()
                if o.class_id == class_id and (include_fresh or o.instance_id not in self.fresh)]

    def spawn(self, class_id: str, x: int, y: int) -> Optional[int]:
        if not _fits(self.spec, class_id, x, y):
            return None
        cls = self.spec.class_def(class_id)
        velocity = _initial_velocity(self.spec, self.state.level_index, class_id, self.march_dirs.get(class_id, 1))
        instance_id = self.next_id
        self.next_id += 1
        self.objects[instance_id] = ObjectInstance(instance_id, class_id, (x, y), cls.size, cls.color, velocity)
        self.fresh.add(instance_id)
        self.events.append(GameEvent(EventKind.SPAWN, instance_id))
        return instance_id

    def despawn(self, instance_id: int):
        del self.objects[instance_id]
        self.events.append(GameEvent(EventKind.DESPAWN, instance_id))

    def move(self, o: ObjectInstance, x: int, y: int, velocity) -> None:
        self.objects[o.instance_id] = replace(o, position=(x, y), velocity=velocity)

    def vertical(self, class_id: str, dy: int) -> None:
        h_grid = self.spec.grid_height
        _, h = self.spec.class_def(class_id).hitbox
        for o in self.of_class(class_id):
            y = o.position[1] + dy
            if y < 0 or y + h > h_grid:
                self.despawn(o.instance_id)
            else:
                self.move(o, o.position[0], y, (0.0, float(dy)))


def _apply_player(b: _StepBuilder, action: str) -> None:
    spec = b.spec
    rule = spec.rules_by_level[b.state.level_index][spec.dynamics_rules.index(spec.player_rule)]
    player = b.state.player()
    binding = rule.param(action)
    w, h = spec.class_def(player.class_id).hitbox
    x, y = player.position
    if isinstance(binding, tuple):
        dx, dy = binding
        if rule.param("edge", "clamp") == "wrap":
            nx = (x + dx) % (spec.grid_width - w + 1)
            ny = (y + dy) % (spec.grid_height - h + 1)
        else:
            nx = min(max(x + dx, 0), spec.grid_width - w)
            ny = min(max(y + dy, 0), spec.grid_height - h)
        b.move(player, nx, ny, (float(nx - x), float(ny - y)))
        return
    b.move(player, x, y, (0.0, 0.0))
    if isinstance(binding, str) and binding.startswith("fire:"):
        projectile = binding.split(":", 1)[1]
        if len(b.of_class(projectile, include_fresh=True)) < rule.param("max_shots", 1):
            b.spawn(projectile, x, y - spec.class_def(projectile).hitbox[1])


def _apply_dynamics(b: _StepBuilder, rng: np.random.Generator) -> None:
    spec = b.spec
    step_count = b.state.step_count
    for rule in spec.rules_by_level[b.state.level_index]:
        if rule.kind is RuleKind.PLAYER:
            continue
        if rule.kind is RuleKind.FALL:
            b.vertical(rule.class_id, int(rule.param("speed", 1)))
        elif rule.kind is RuleKind.RISE:
            b.vertical(rule.class_id, -int(rule.param("speed", 1)))
        elif rule.kind is RuleKind.MARCH:
            _march(b, rule, step_count)
        elif rule.kind is RuleKind.LANE_ADVANCE:
            b.vertical(rule.class_id, int(rule.param("speed", 1)))
            lanes = rule.param("lanes", (0,))
            lanes = lanes if isinstance(lanes, tuple) else (lanes,)
            draw, lane = rng.random(), lanes[int(rng.integers(len(lanes)))]
            if draw < rule.param("rate", 0.0):
                slot = ObjectInstance(-1, rule.class_id, (lane, 0), (1, 1), (0, 0, 0))
                if not any(_overlap(spec, slot, o) for o in b.of_class(rule.class_id, include_fresh=True)):
                    b.spawn(rule.class_id, lane, 0)
        elif rule.kind is RuleKind.SPAWN:
            target = rule.param("spawns")
            for source in b.of_class(rule.class_id):
                if rng.random() < rule.param("rate", 0.0):
                    _, h = spec.class_def(source.class_id).hitbox
                    b.spawn(target, source.position[0], source.position[1] + h)
        elif rule.kind is RuleKind.SHOOT:
            shooters = b.of_class(rule.class_id)
            draw = rng.random()
            if shooters and draw < rule.param("rate", 0.0):
                shooter = shooters[int(rng.integers(len(shooters)))]
                _, h = spec.class_def(shooter.class_id).hitbox
                b.spawn(rule.param("projectile"), shooter.position[0], shooter.position[1] + h)


def _march(b: _StepBuilder, rule, step_count: int) -> None:
    spec = b.spec
    dx, period, drop = rule.param("dx", 1), rule.param("period", 1), rule.param("drop", 1)
    members = b.of_class(rule.class_id)
    direction = b.march_dirs.get(rule.class_id, 1)
    w, h = spec.class_def(rule.class_id).hitbox
    if members and step_count % period == period - 1:
        blocked = any(o.position[0] + direction * dx < 0 or o.position[0] + direction * dx + w > spec.grid_width
                      for o in members)
        if blocked:
            direction = -direction
            b.march_dirs[rule.class_id] = direction
            for o in members:
                b.move(o, o.position[0], min(o.position[1] + drop, spec.grid_height - h), o.velocity)
            members = b.of_class(rule.class_id)
        else:
            for o in members:
                b.move(o, o.position[0] + direction * dx, o.position[1], o.velocity)
            members = b.of_class(rule.class_id)
    for o in members:
        b.move(o, o.position[0], o.position[1], (direction * dx / period, 0.0))


def _resolve_contacts(b: _StepBuilder) -> int:
    spec = b.spec
    player_class = spec.player_class
    win = spec.termination
    candidates = []
    for index, rule in enumerate(spec.reward_rules):
        if rule.kind is not RewardKind.CONTACT:
            continue
        firsts = [o for o in b.objects.values() if o.class_id == rule.first]
        seconds = [o for o in b.objects.values() if o.class_id == rule.second]
        for a in firsts:
            for other in seconds:
                if a.instance_id != other.instance_id and _overlap(spec, a, other):
                    involves_player = player_class in (a.class_id, other.class_id)
                    candidates.append((0 if involves_player else 1, a.instance_id, other.instance_id, index))
    # player-involving contacts resolve first, then by instance order
    candidates.sort()
    reward, dead = 0, set()
    for _, first, second, index in candidates:
        if first in dead or second in dead:
            continue
        rule = spec.reward_rules[index]
        reward += rule.reward
        b.events.append(GameEvent(EventKind.CONTACT, first, second, rule.reward))
        if rule.kill in (KillMode.FIRST, KillMode.BOTH):
            dead.add(first)
        if rule.kill in (KillMode.SECOND, KillMode.BOTH):
            dead.add(second)
        if (win.win is WinKind.COLLECT and rule.first == player_class and rule.second == win.win_class):
            b.collected[win.win_class] = b.collected.get(win.win_class, 0) + 1
    for instance_id in sorted(dead):
        b.despawn(instance_id)
    return reward


def step(state: WorldState, action: str) -> Tuple[WorldState, StepOutcome]:
    if state.status is not Status.RUNNING:
        raise TerminalStateError(f"{state.spec_name} level {state.level_index} already {state.status.value}")
    spec = state.spec
    if action not in spec.actions:
        raise InvalidAction(f"'{action}' is not one of {spec.actions}")
    rng = np.random.default_rng([*state.rng_state, state.step_count])
    b = _StepBuilder(state)
    player_id = state.player().instance_id

    _apply_player(b, action)
    _apply_dynamics(b, rng)
    reward = _resolve_contacts(b)

    alive = player_id in b.objects
    if alive:
        reward += sum(r.reward for r in spec.reward_rules if r.kind is RewardKind.SURVIVE)

    t = spec.termination
    step_count = state.step_count + 1
    status = Status.RUNNING
    if not alive:
        status = Status.LOST
    elif t.win is WinKind.CLEAR and not b.of_class(t.win_class, include_fresh=True):
        status = Status.WON
    elif t.win is WinKind.COLLECT and b.collected.get(t.win_class, 0) >= t.win_count:
        status = Status.WON
    elif t.timeout and step_count >= t.timeout:
        status = Status.WON if t.win is WinKind.SURVIVE else Status.LOST
    if status is Status.WON:
        reward += t.level_bonus
    elif status is Status.LOST:
        reward += t.lose_penalty
        if player_id in b.objects:
            b.despawn(player_id)

    new_state = replace(
        state,
        objects=tuple(b.objects.values()),
        score=state.score + reward,
        step_count=step_count,
        status=status,
        next_instance_id=b.next_id,
        march_dirs=tuple(sorted(b.march_dirs.items())),
        collected=tuple(sorted(b.collected.items())),
    )
    return new_state, StepOutcome(reward=reward, status_after=status, events=tuple(b.events))


def observe(state: WorldState) -> Tuple[ObservedObject, ...]:
    return tuple(ObservedObject(o.instance_id, o.position, o.bbox, o.color, o.velocity) for o in state.objects)


@lru_cache(maxsize=256)
def _sprite_mask(sprite_id: str, width: int, height: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(sprite_id.encode("utf-8")).digest()[:8], "little")
    mask = np.where(np.random.default_rng(seed).random((height, width, 1)) < 0.6, 1.0, 0.35)
    mask.setflags(write=False)
    return mask


def render_array(state: WorldState, cell_px: int) -> np.ndarray:
    if cell_px < 1:
        raise ValueError("cell_px must be >= 1")
    spec = state.spec
    image = np.empty((spec.grid_height * cell_px, spec.grid_width * cell_px, 3), dtype=np.uint8)
    image[:, :] = spec.background
    for o in state.objects:
        x0, y0 = o.position[0] * cell_px, o.position[1] * cell_px
        w, h = o.bbox[0] * cell_px, o.bbox[1] * cell_px
        if spec.renderer is Renderer.SPRITE:
            mask = _sprite_mask(spec.class_def(o.class_id).sprite_id, w, h)
            image[y0:y0 + h, x0:x0 + w] = (np.asarray(o.color, dtype=np.float64) * mask).astype(np.uint8)
        else:
            image[y0:y0 + h, x0:x0 + w] = o.color
    return image


def render(state: WorldState, cell_px: int) -> PixelFrame:
    image = render_array(state, cell_px)
    return PixelFrame(width=image.shape[1], height=image.shape[0], pixels=image.tobytes())


@dataclass(frozen=True)
class EnvStep:
    observation: Tuple[ObservedObject, ...]
    reward: int
    done: bool
    status: Status
    level_advanced: bool
    outcome: StepOutcome


class GameEnv:
    """Resettable multi-level episode runner over one GameSpec."""

    def __init__(self, spec: GameSpec, seed: int = 0, record_trace: bool = False):
        self.spec = spec
        self.seed = seed
        self.record_trace = record_trace
        self.trace: List[dict] = []
        self.state: Optional[WorldState] = None
        self.done = True

    @property
    def keys(self) -> Tuple[str, ...]:
        return self.spec.actions

    @property
    def grid_size(self) -> Tuple[int, int]:
        return self.spec.grid_width, self.spec.grid_height

    @property
    def score(self) -> int:
        return self.state.score if self.state is not None else 0

    def reset(self, seed: Optional[int] = None) -> Tuple[ObservedObject, ...]:
        if seed is not None:
            self.seed = seed
        self.state = reset(self.spec, 0, self.seed)
        self.done = False
        self.trace = []
        return observe(self.state)

    def step(self, key: str) -> EnvStep:
        if self.state is None:
            raise TerminalStateError("call reset() before step()")
        state, outcome = step(self.state, key)
        advanced = False
        if outcome.status_after is Status.WON and state.level_index + 1 < len(self.spec.levels):
            logger.debug("%s: level %d won at step %d", self.spec.name, state.level_index, state.step_count)
            state = reset(self.spec, state.level_index + 1, self.seed, score=state.score)
            advanced = True
        self.done = outcome.status_after is not Status.RUNNING and not advanced
        self.state = state
        if self.record_trace:
            self.trace.append({"step": len(self.trace), "action": key, "reward": outcome.reward,
                               "status": outcome.status_after.value, "level": state.level_index})
        return EnvStep(observe(state), outcome.reward, self.done, outcome.status_after, advanced, outcome)

    def observe(self) -> Tuple[ObservedObject, ...]:
        return observe(self.state)

    def frame(self, cell_px: int = 1) -> np.ndarray:
        return render_array(self.state, cell_px)
