import logging
from collections import Counter
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.models.agent_profile import DISPLACEMENT_ACTIONS, AgentProfile, BiasReport, BiasStage, KeyAction
from src.models.categories import AppearanceSignature
from src.models.errors import AmbiguousAgent, IdentificationFailed
from src.models.learner_config import IdentifyConfig
from src.models.world_state import ObservedObject, Status
from src.services.engine import GameEnv
from src.services.perception import cell_distance, find_signature

logger = logging.getLogger(__name__)

Frame = Sequence[ObservedObject]


def _signatures(frame: Frame) -> Counter:
    return Counter(AppearanceSignature.of(o) for o in frame)


def filter_unique(frames: Sequence[Frame]) -> FrozenSet[AppearanceSignature]:
    """Signatures that never appear more than once in any frame where they appear."""
    seen: Set[AppearanceSignature] = set()
    repeated: Set[AppearanceSignature] = set()
    for frame in frames:
        for signature, n in _signatures(frame).items():
            seen.add(signature)
            if n > 1:
                repeated.add(signature)
    return frozenset(seen - repeated)


def filter_permanent(frames: Sequence[Frame], candidates) -> FrozenSet[AppearanceSignature]:
    kept = set(candidates)
    for frame in frames:
        kept &= set(_signatures(frame))
    return frozenset(kept)


def observe_window(env: GameEnv, window: int, seed: int = 0) -> List[Tuple[ObservedObject, ...]]:
    """Record `window` frames of running play under uniformly random keys."""
    rng = np.random.default_rng(seed)
    frames = [env.reset()]
    while len(frames) < window:
        step = env.step(env.keys[int(rng.integers(len(env.keys)))])
        if step.done:
            frames.append(env.reset())
        elif step.status is Status.RUNNING:
            frames.append(step.observation)
    return frames[:window]


def _press_once(env: GameEnv, key: str, candidates, seed: int) -> Dict[AppearanceSignature, Tuple[int, int]]:
    """Reset with `seed`, press `key` once and return each candidate's displacement."""
    before = env.reset(seed=seed)
    after = env.step(key).observation
    moves = {}
    for signature in candidates:
        a, b = find_signature(before, signature), find_signature(after, signature)
        if a is not None and b is not None:
            moves[signature] = (b.x - a.x, b.y - a.y)
    return moves


def _dominant(displacements: List[Tuple[int, int]], trials: int, threshold: float) -> Optional[Tuple[int, int]]:
    if not displacements:
        return None
    move, n = Counter(displacements).most_common(1)[0]
    if move == (0, 0) or n < threshold * trials:
        return None
    return move


def motion_binding_test(env: GameEnv, candidates, trials: int = 10, threshold: float = 0.8,
                        seed: int = 0) -> AppearanceSignature:
    """The candidate whose displacement follows the pressed key consistently, with distinct moves for distinct keys."""
    if not candidates:
        raise IdentificationFailed("no candidates left for the motion binding test")
    history: Dict[str, Dict[AppearanceSignature, List[Tuple[int, int]]]] = {}
    for key in env.keys:
        per_key = history.setdefault(key, {s: [] for s in candidates})
        # one reset seed per trial
        for trial in range(trials):
            for signature, move in _press_once(env, key, candidates, seed + trial).items():
                per_key[signature].append(move)
    passed = []
    for signature in sorted(candidates):
        responses = {_dominant(history[key][signature], trials, threshold) for key in env.keys}
        responses.discard(None)
        # a self-propelled object moves the same way whatever the key
        if len(responses) >= 2:
            passed.append(signature)
    if not passed:
        raise IdentificationFailed(f"none of {len(candidates)} candidates responds to the keys")
    if len(passed) > 1:
        raise AmbiguousAgent(f"{len(passed)} candidates respond identically to input", passed)
    return passed[0]


def identify_agent(env: GameEnv, window: int = 50, trials: int = 10, seed: int = 0,
                   threshold: float = 0.8) -> Tuple[AgentProfile, BiasReport]:
    frames = observe_window(env, window, seed)
    stages: List[Tuple[BiasStage, FrozenSet[AppearanceSignature]]] = []

    candidates = filter_unique(frames)
    stages.append((BiasStage.UNIQUENESS, candidates))
    if len(candidates) > 1:
        candidates = filter_permanent(frames, candidates)
        stages.append((BiasStage.PERMANENCE, candidates))
    if len(candidates) > 1:
        chosen = motion_binding_test(env, candidates, trials, threshold, seed)
        candidates = frozenset({chosen})
        stages.append((BiasStage.MOTION_BINDING, candidates))
    if not candidates:
        raise IdentificationFailed(f"no agent candidate survives {stages[-1][0].value}")

    signature = next(iter(candidates))
    report = BiasReport(bias_used=stages[-1][0], candidates_after_each_stage=tuple(stages))
    handle = find_signature(env.reset(seed=seed), signature)
    logger.info("agent %s identified by %s (%s)", signature, report.bias_used.value,
                " -> ".join(str(n) for n in report.sizes()))
    return AgentProfile(signature=signature, instance_handle=handle.handle if handle else None), report


def discover_key_bindings(env: GameEnv, agent: AgentProfile, presses: int = 5, threshold: int = 3,
                          seed: int = 0) -> Dict[str, KeyAction]:
    key_map: Dict[str, KeyAction] = {}
    for key in env.keys:
        moves: List[Tuple[int, int]] = []
        spawns = 0
        for press in range(presses):
            before = env.reset(seed=seed + press)
            after = env.step(key).observation
            a, b = find_signature(before, agent.signature), find_signature(after, agent.signature)
            if a is None or b is None:
                continue
            moves.append((b.x - a.x, b.y - a.y))
            old = {o.handle for o in before}
            if any(o.handle not in old and cell_distance(b, o) <= 1 for o in after):
                spawns += 1
        # a strict majority of presses must agree on the displacement
        move = _dominant(moves, presses, 0.5)
        if move in DISPLACEMENT_ACTIONS and moves.count(move) * 2 > presses:
            key_map[key] = DISPLACEMENT_ACTIONS[move]
        elif spawns >= threshold:
            key_map[key] = KeyAction.FIRE
        else:
            key_map[key] = KeyAction.NO_EFFECT
    logger.info("key bindings: %s", ", ".join(f"{k}={a.value}" for k, a in key_map.items()))
    return key_map


def identify_and_bind(env: GameEnv, config: IdentifyConfig = IdentifyConfig(), seed: int = 0) -> Tuple[AgentProfile, BiasReport]:
    """identify_agent followed by discover_key_bindings, the form the pipeline consumes."""
    profile, report = identify_agent(env, config.window, config.trials, seed, config.motion_threshold)
    key_map = discover_key_bindings(env, profile, config.fire_presses, config.fire_threshold, seed)
    return profile.with_key_map(key_map), report
