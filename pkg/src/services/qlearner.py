import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from tqdm import tqdm

from src.models.agent_profile import AgentProfile
from src.models.categories import CategoryModel
from src.models.errors import ArtifactFormatError, InvalidAction
from src.models.learner_config import LearnerConfig
from src.services.encoder import StateEncoder
from src.services.engine import GameEnv
from src.services.perception import CategoryLearner
from src.services.pipeline import action_set, episode_seed

logger = logging.getLogger(__name__)

Key = Tuple[int, str]


class QTable:
    def __init__(self):
        self.values: Dict[Key, float] = {}
        self.visit_counts: Dict[Key, int] = {}
        self.states: Set[int] = set()

    def get(self, s: int, a: str) -> float:
        return self.values.get((s, a), 0.0)

    def row(self, s: int, actions: Sequence[str]) -> np.ndarray:
        return np.array([self.get(s, a) for a in actions], dtype=np.float64)

    def max_value(self, s: int, actions: Sequence[str]) -> float:
        return float(self.row(s, actions).max())

    def updates(self) -> int:
        return sum(self.visit_counts.values())

    def __len__(self):
        return len(self.values)


def select_action(q: QTable, s: int, actions: Sequence[str], epsilon: float, rng: np.random.Generator) -> str:
    if not actions:
        raise InvalidAction("cannot choose from an empty action set")
    if rng.random() < epsilon:
        return actions[int(rng.integers(len(actions)))]
    row = q.row(s, actions)
    best = np.flatnonzero(row == row.max())
    return actions[int(best[int(rng.integers(len(best)))])]


def update(q: QTable, s: int, a: str, r: float, s_next: Optional[int], terminal: bool, cfg: LearnerConfig,
           actions: Sequence[str]) -> QTable:
    """One-step Q-learning backup on a single (s, a) cell."""
    target = r if terminal or s_next is None else r + cfg.gamma * q.max_value(s_next, actions)
    q.values[(s, a)] = (1.0 - cfg.alpha) * q.get(s, a) + cfg.alpha * target
    q.visit_counts[(s, a)] = q.visit_counts.get((s, a), 0) + 1
    q.states.add(s)
    return q


def _greedy_episode(env: GameEnv, encoder: StateEncoder, model: CategoryModel, q: QTable,
                    actions: Sequence[str], seed: int) -> Tuple[float, int, int]:
    rng = np.random.default_rng(seed)
    obs = env.reset(seed=seed)
    steps = novel = 0
    while True:
        s = encoder.key(obs, model)
        if s not in q.states:
            novel += 1
        step = env.step(select_action(q, s, actions, 0.0, rng))
        steps += 1
        obs = step.observation
        if step.done:
            return float(env.score), steps, novel


def evaluate_greedy(env: GameEnv, encoder: StateEncoder, model: CategoryModel, q: QTable,
                    actions: Sequence[str], seeds: Iterable[int]) -> Tuple[List[float], float]:
    """Scores of full episodes under the frozen greedy policy, and the share of steps in untrained states."""
    scores, steps, novel = [], 0, 0
    for seed in seeds:
        score, n, m = _greedy_episode(env, encoder, model, q, actions, seed)
        scores.append(score)
        steps += n
        novel += m
    return scores, (novel / steps if steps else 0.0)


def train(env: GameEnv, encoder: StateEncoder, perception: CategoryLearner, agent: AgentProfile,
          cfg: LearnerConfig, epochs: int, eval_interval: int = 0,
          on_interval: Optional[Callable[[int, QTable], None]] = None,
          progress: bool = False) -> Tuple[QTable, List[Tuple[int, float]]]:
    """Run `epochs` environment steps with one update each; returns the table and (epoch, episode return) pairs."""
    q = QTable()
    curve: List[Tuple[int, float]] = []
    if epochs <= 0:
        return q, curve
    actions = action_set(agent, env.keys)
    rng = np.random.default_rng(cfg.seed)
    episode = 0
    obs = env.reset(seed=episode_seed(cfg.seed, episode))
    perception.start(obs)
    s = encoder.key(obs, perception.model)
    for t in tqdm(range(epochs), desc=f"qlearn {env.spec.name}", disable=not progress, mininterval=1.0):
        a = select_action(q, s, actions, cfg.epsilon(t), rng)
        step = env.step(a)
        if step.level_advanced:
            perception.start(step.observation)
        else:
            perception.observe(step.observation, step.outcome, a)
        s_next = encoder.key(step.observation, perception.model)
        update(q, s, a, step.reward, s_next, step.done or s_next is None, cfg, actions)
        if step.done:
            curve.append((t + 1, float(env.score)))
            episode += 1
            obs = env.reset(seed=episode_seed(cfg.seed, episode))
            perception.start(obs)
            s = encoder.key(obs, perception.model)
        else:
            s = s_next
        if on_interval is not None and eval_interval and (t + 1) % eval_interval == 0:
            on_interval(t + 1, q)
    if on_interval is not None and eval_interval and epochs % eval_interval:
        on_interval(epochs, q)
    logger.info("%s: %d steps, %d episodes, %d table entries", env.spec.name, epochs, episode, len(q))
    return q, curve


def export_table(q: QTable, actions: Sequence[str], meta: Optional[Dict[str, str]] = None) -> str:
    lines = [f"# actions: {' '.join(actions)}"]
    lines.extend(f"# {name}: {value}" for name, value in sorted((meta or {}).items()))
    for (s, a) in sorted(q.values, key=lambda k: (k[0], k[1])):
        lines.append(f"{s} {a} {q.values[(s, a)]!r} {q.visit_counts.get((s, a), 0)}")
    return "\n".join(lines) + "\n"


def import_table(text: str) -> Tuple[QTable, Tuple[str, ...], Dict[str, str]]:
    q = QTable()
    actions: Tuple[str, ...] = ()
    meta: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            name, _, value = line[1:].partition(":")
            if name.strip() == "actions":
                actions = tuple(value.split())
            else:
                meta[name.strip()] = value.strip()
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ArtifactFormatError(f"q-table line {number}: expected 4 fields, got {len(parts)}")
        try:
            s, a, value, count = int(parts[0]), parts[1], float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ArtifactFormatError(f"q-table line {number}: {exc}") from exc
        q.values[(s, a)] = value
        q.visit_counts[(s, a)] = count
        q.states.add(s)
    if not actions:
        raise ArtifactFormatError("q-table has no '# actions:' header")
    return q, actions, meta
