import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.models.agent_profile import AgentProfile, BiasReport, KeyAction
from src.models.categories import CategoryModel
from src.models.encoded_state import EncoderConfig
from src.models.game_spec import GameSpec
from src.models.learner_config import IdentifyConfig, PerceptionConfig
from src.services.agent_id import identify_and_bind
from src.services.encoder import StateEncoder
from src.services.engine import GameEnv
from src.services.perception import CategoryLearner

logger = logging.getLogger(__name__)


def episode_seed(run_seed: int, episode: int) -> int:
    """Seeds for training and warm-up episodes; they never reach the evaluation range."""
    return (run_seed + 1) * 1_000_000 + episode


def action_set(agent: AgentProfile, keys: Tuple[str, ...]) -> Tuple[str, ...]:
    """Keys with an effect, plus the first key that does nothing as the idle action."""
    actions = [k for k in keys if agent.key_map.get(k, KeyAction.NO_EFFECT) is not KeyAction.NO_EFFECT]
    idle = next((k for k in keys if agent.key_map.get(k, KeyAction.NO_EFFECT) is KeyAction.NO_EFFECT), None)
    if idle is not None:
        actions.insert(0, idle)
    return tuple(k for k in keys if k in actions)


def warm_up(env: GameEnv, learner: CategoryLearner, steps: int, seed: int) -> int:
    """Random play that only feeds the category learner. Returns the number of episodes begun."""
    rng = np.random.default_rng(seed)
    episodes = 0
    learner.start(env.reset(seed=episode_seed(seed, episodes)))
    for _ in range(steps):
        key = env.keys[int(rng.integers(len(env.keys)))]
        step = env.step(key)
        if step.level_advanced:
            learner.start(step.observation)
        else:
            learner.observe(step.observation, step.outcome, key)
        if step.done:
            episodes += 1
            learner.start(env.reset(seed=episode_seed(seed, episodes)))
    return episodes


@dataclass
class Pipeline:
    env: GameEnv
    profile: AgentProfile
    report: BiasReport
    perception: CategoryLearner
    encoder: StateEncoder

    @property
    def actions(self) -> Tuple[str, ...]:
        return action_set(self.profile, self.env.keys)


def build_pipeline(spec: GameSpec, encoder_config: EncoderConfig, seed: int, warmup_steps: int,
                   config: Optional[Dict[str, Any]] = None, model: Optional[CategoryModel] = None) -> Pipeline:
    """Identify the agent, bind its keys and warm the category model up on `spec` itself.

    A `model` from an earlier run seeds the learner; its resolved categories are kept.
    """
    config = config or {}
    env = GameEnv(spec, seed=seed)
    profile, report = identify_and_bind(env, IdentifyConfig.from_config(config), seed)
    learner = CategoryLearner(profile, PerceptionConfig.from_config(config), model)
    warm_up(env, learner, warmup_steps, seed)
    resolved = {str(s): c.value for s, c in learner.model.resolved().items()}
    logger.info("%s: %d signatures resolved after %d warm-up steps: %s", spec.name, len(resolved),
                warmup_steps, resolved)
    encoder = StateEncoder(encoder_config, spec.grid_width, profile.signature)
    return Pipeline(env=env, profile=profile, report=report, perception=learner, encoder=encoder)
