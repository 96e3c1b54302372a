import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.models.agent_profile import AgentProfile
from src.models.categories import AppearanceSignature, Category, CategoryModel, Evidence, TrackedObjects
from src.models.errors import ArtifactFormatError
from src.models.learner_config import PerceptionConfig
from src.models.world_state import GameEvent, ObservedObject, StepOutcome

logger = logging.getLogger(__name__)

EXPORT_HEADER = "# signature category moved stayed positive negative spawned_by_agent"


def _group(objects: Iterable[ObservedObject]) -> Dict[AppearanceSignature, List[ObservedObject]]:
    groups: Dict[AppearanceSignature, List[ObservedObject]] = {}
    for obj in objects:
        groups.setdefault(AppearanceSignature.of(obj), []).append(obj)
    return groups


def track(prev: Sequence[ObservedObject], cur: Sequence[ObservedObject], max_jump: Optional[int] = None) -> TrackedObjects:
    """Greedy nearest-neighbour correspondence between two frames, only within equal signatures."""
    correspondences: Dict[int, int] = {}
    cur_groups = _group(cur)
    for signature, before in _group(prev).items():
        after = cur_groups.get(signature, [])
        if not after:
            continue
        a = np.array([o.position for o in before], dtype=np.int64)
        b = np.array([o.position for o in after], dtype=np.int64)
        # Chebyshev distance between every previous and current anchor cell
        dist = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
        pairs = sorted(
            (int(dist[i, j]), before[i].handle, after[j].handle)
            for i in range(len(before))
            for j in range(len(after))
            if max_jump is None or dist[i, j] <= max_jump
        )
        used_prev, used_cur = set(), set()
        for _, p, c in pairs:
            if p in used_prev or c in used_cur:
                continue
            correspondences[p] = c
            used_prev.add(p)
            used_cur.add(c)
    matched = set(correspondences.values())
    return TrackedObjects(
        correspondences=correspondences,
        entered=tuple(o.handle for o in cur if o.handle not in matched),
        exited=tuple(o.handle for o in prev if o.handle not in correspondences),
        previous={o.handle: o for o in prev},
        current={o.handle: o for o in cur},
    )


def cell_distance(a: ObservedObject, b: ObservedObject) -> int:
    dx = max(0, b.x - (a.x + a.bbox[0] - 1), a.x - (b.x + b.bbox[0] - 1))
    dy = max(0, b.y - (a.y + a.bbox[1] - 1), a.y - (b.y + b.bbox[1] - 1))
    return max(dx, dy)


def find_signature(objects: Iterable[ObservedObject], signature: AppearanceSignature) -> Optional[ObservedObject]:
    return next((o for o in objects if AppearanceSignature.of(o) == signature), None)


def _resolve(signature: AppearanceSignature, ev: Evidence, config: PerceptionConfig) -> Optional[Category]:
    if ev.spawned_by_agent >= config.agent_object_min:
        return Category.AGENT_OBJECT
    if ev.moved == 0:
        return Category.STATIC if ev.stayed >= config.n_static else None
    if ev.contradictory:
        winner = Category.MOVING_GOOD if ev.positive > ev.negative else Category.MOVING_BAD
        logger.warning("signature %s has %d positive and %d negative contacts; resolved as %s",
                       signature, ev.positive, ev.negative, winner.value)
        return winner
    if ev.negative >= 1:
        return Category.MOVING_BAD
    if ev.positive >= 1:
        return Category.MOVING_GOOD
    return None


def update_model(
    model: CategoryModel,
    tracked: TrackedObjects,
    contacts: Sequence[GameEvent],
    agent: AgentProfile,
    reward: float = 0,
    fired: bool = False,
    config: PerceptionConfig = PerceptionConfig(),
) -> CategoryModel:
    """Fold one transition's evidence into a copy of the model and resolve what it now supports."""
    model = model.copy()
    model.assignments.setdefault(agent.signature, Category.AGENT)
    counts: Dict[AppearanceSignature, Dict[str, int]] = {}

    def bump(signature: AppearanceSignature, name: str):
        if signature != agent.signature:
            counts.setdefault(signature, {}).setdefault(name, 0)
            counts[signature][name] += 1

    moved: Dict[AppearanceSignature, bool] = {}
    for p, c in tracked.correspondences.items():
        signature = AppearanceSignature.of(tracked.previous[p])
        moved[signature] = moved.get(signature, False) or tracked.displacement(p) != (0, 0)
    for signature, did_move in moved.items():
        bump(signature, "moved" if did_move else "stayed")

    agent_before = find_signature(tracked.previous.values(), agent.signature)
    agent_after = find_signature(tracked.current.values(), agent.signature)
    if agent_before is not None:
        died = agent_after is None
        sign = "negative" if died or reward < 0 else "positive" if reward > 0 else None
        for event in contacts:
            if agent_before.handle not in (event.first, event.second):
                continue
            other = event.second if event.first == agent_before.handle else event.first
            obj = tracked.previous.get(other) or tracked.current.get(other)
            if obj is not None and sign is not None:
                bump(AppearanceSignature.of(obj), sign)

    if fired and agent_after is not None:
        for handle in tracked.entered:
            obj = tracked.current[handle]
            if cell_distance(agent_after, obj) <= 1:
                bump(AppearanceSignature.of(obj), "spawned_by_agent")

    for signature, added in counts.items():
        evidence = model.evidence.get(signature, Evidence()).add(**added)
        model.evidence[signature] = evidence
        if model.assignments.get(signature, Category.UNKNOWN) is not Category.UNKNOWN:
            continue
        category = _resolve(signature, evidence, config)
        if category is not None:
            model.assignments[signature] = category
            logger.debug("signature %s resolved as %s", signature, category.value)
    return model


def classify(signature: AppearanceSignature, model: CategoryModel) -> Category:
    return model.assignments.get(signature, Category.UNKNOWN)


def categorize(objects: Iterable[ObservedObject], model: CategoryModel) -> List[Tuple[ObservedObject, Category]]:
    return [(o, classify(AppearanceSignature.of(o), model)) for o in objects]


def relabel(model: CategoryModel, mapping: Dict[AppearanceSignature, AppearanceSignature]) -> CategoryModel:
    """Rename signatures consistently; unmapped signatures keep their own name."""
    return CategoryModel(
        assignments={mapping.get(s, s): c for s, c in model.assignments.items()},
        evidence={mapping.get(s, s): e for s, e in model.evidence.items()},
    )


def export_model(model: CategoryModel) -> str:
    lines = [EXPORT_HEADER]
    for signature in sorted(set(model.assignments) | set(model.evidence)):
        ev = model.evidence.get(signature, Evidence())
        category = classify(signature, model)
        lines.append(f"{signature} {category.value} {ev.moved} {ev.stayed} {ev.positive} {ev.negative} "
                     f"{ev.spawned_by_agent}")
    return "\n".join(lines) + "\n"


def import_model(text: str) -> CategoryModel:
    model = CategoryModel()
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ArtifactFormatError(f"category table line {number}: expected 7 fields, got {len(parts)}")
        try:
            signature = AppearanceSignature.parse(parts[0])
            category = Category(parts[1])
            evidence = Evidence(*(int(v) for v in parts[2:]))
        except ValueError as exc:
            raise ArtifactFormatError(f"category table line {number}: {exc}") from exc
        if category is not Category.UNKNOWN:
            model.assignments[signature] = category
        model.evidence[signature] = evidence
    return model


class CategoryLearner:
    """Runs track + update_model over a live frame stream; freeze() stops learning but keeps classifying."""

    def __init__(self, agent: AgentProfile, config: PerceptionConfig = PerceptionConfig(),
                 model: Optional[CategoryModel] = None):
        self.agent = agent
        self.config = config
        self.model = model if model is not None else CategoryModel()
        self.model.assignments.setdefault(agent.signature, Category.AGENT)
        self.frozen = False
        self._previous: Optional[Tuple[ObservedObject, ...]] = None

    def start(self, objects: Sequence[ObservedObject]):
        self._previous = tuple(objects)

    def observe(self, objects: Sequence[ObservedObject], outcome: StepOutcome, key: Optional[str] = None):
        objects = tuple(objects)
        if not self.frozen and self._previous is not None:
            tracked = track(self._previous, objects, self.config.max_jump)
            fired = key is not None and key in self.agent.fire_keys()
            self.model = update_model(self.model, tracked, outcome.contacts, self.agent,
                                      reward=outcome.reward, fired=fired, config=self.config)
        self._previous = objects

    def freeze(self) -> CategoryModel:
        self.frozen = True
        return self.model

    def categorize(self, objects: Iterable[ObservedObject]) -> List[Tuple[ObservedObject, Category]]:
        return categorize(objects, self.model)
