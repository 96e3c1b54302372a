from collections import Counter

import numpy as np
import pytest

from src.models.agent_profile import AgentProfile, KeyAction
from src.models.categories import AppearanceSignature
from src.models.errors import ArtifactFormatError, ConfigError, InvalidAction
from src.models.learner_config import LearnerConfig
from src.services import qlearner
from src.services.encoder import config_for
from src.services.pipeline import action_set, build_pipeline, episode_seed
from src.services.qlearner import QTable, export_table, import_table, select_action, update


def test_update_arithmetic():
    cfg = LearnerConfig(alpha=0.5, gamma=0.9)
    q = QTable()
    q.values[(1, "x")] = 2.0
    update(q, 0, "a", 1.0, 1, False, cfg, ["a", "x"])
    assert q.get(0, "a") == pytest.approx(1.4)
    update(q, 0, "b", 1.0, 1, True, cfg, ["a", "x"])
    assert q.get(0, "b") == pytest.approx(0.5)
    assert q.visit_counts == {(0, "a"): 1, (0, "b"): 1}
    assert q.states == {0}


def test_update_treats_missing_next_state_as_terminal():
    cfg = LearnerConfig(alpha=1.0, gamma=0.9)
    q = QTable()
    update(q, 0, "a", -3.0, None, False, cfg, ["a"])
    assert q.get(0, "a") == -3.0


def test_chain_converges_to_value_iteration():
    # states 0..3 on a line; reaching state 3 pays 1 and ends the episode
    n, gamma, actions = 4, 0.9, ["l", "r"]

    def move(s, a):
        return max(s - 1, 0) if a == "l" else s + 1

    values = np.zeros(n)
    for _ in range(200):
        for s in range(n - 1):
            values[s] = max((1.0 if move(s, a) == n - 1 else gamma * values[move(s, a)]) for a in actions)

    q = QTable()
    cfg = LearnerConfig(alpha=0.5, gamma=gamma)
    for _ in range(2000):
        for s in range(n - 1):
            for a in actions:
                nxt = move(s, a)
                terminal = nxt == n - 1
                update(q, s, a, 1.0 if terminal else 0.0, None if terminal else nxt, terminal, cfg, actions)
    for s in range(n - 1):
        assert q.max_value(s, actions) == pytest.approx(values[s], abs=1e-8)
    assert q.get(0, "r") == pytest.approx(gamma ** 2, abs=1e-8)
    assert q.get(0, "l") == pytest.approx(gamma ** 3, abs=1e-8)


def test_greedy_selection_and_tie_breaking():
    q = QTable()
    q.values[(0, "b")] = 1.0
    rng = np.random.default_rng(0)
    assert {select_action(q, 0, ["a", "b", "c"], 0.0, rng) for _ in range(20)} == {"b"}
    ties = Counter(select_action(q, 5, ["a", "b"], 0.0, rng) for _ in range(200))
    assert set(ties) == {"a", "b"}


def test_full_exploration_is_uniform():
    rng = np.random.default_rng(1)
    q = QTable()
    q.values[(0, "a")] = 10.0
    counts = Counter(select_action(q, 0, ["a", "b", "c"], 1.0, rng) for _ in range(3000))
    assert all(800 <= counts[a] <= 1200 for a in "abc")


def test_empty_action_set():
    with pytest.raises(InvalidAction):
        select_action(QTable(), 0, [], 0.0, np.random.default_rng(0))


def test_epsilon_schedule():
    cfg = LearnerConfig(epsilon_start=1.0, epsilon_end=0.01, decay_steps=100)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(50) == pytest.approx(0.505)
    assert cfg.epsilon(100) == pytest.approx(0.01)
    assert cfg.epsilon(10_000) == pytest.approx(0.01)


def test_learner_config_from_config():
    cfg = LearnerConfig.from_config({"qlearner": {"alpha": 0.2, "decay_fraction": 0.5}}, epochs=1000, seed=4)
    assert cfg.alpha == 0.2
    assert cfg.decay_steps == 500
    assert cfg.seed == 4


@pytest.mark.parametrize("kwargs", [{"alpha": 0.0}, {"alpha": 1.5}, {"gamma": -0.1}, {"decay_steps": 0}])
def test_learner_config_validation(kwargs):
    with pytest.raises(ConfigError):
        LearnerConfig(**kwargs)


def test_export_and_import_table():
    q = QTable()
    q.values[(3, "left")] = 0.1 + 0.2
    q.visit_counts[(3, "left")] = 7
    q.values[(0, "none")] = -1.25
    q.visit_counts[(0, "none")] = 1
    text = export_table(q, ["none", "left", "right"], {"game": "myaliensv1", "k": "4"})
    restored, actions, meta = import_table(text)
    assert actions == ("none", "left", "right")
    assert meta == {"game": "myaliensv1", "k": "4"}
    assert restored.values == q.values
    assert restored.visit_counts == q.visit_counts
    assert restored.states == {0, 3}


def test_import_table_errors():
    with pytest.raises(ArtifactFormatError):
        import_table("3 left 0.5 1\n")
    with pytest.raises(ArtifactFormatError):
        import_table("# actions: left\n3 left 0.5\n")
    with pytest.raises(ArtifactFormatError):
        import_table("# actions: left\n3 left half 1\n")


def test_episode_seeds_avoid_evaluation_range():
    assert episode_seed(0, 0) == 1_000_000
    assert episode_seed(2, 5) == 3_000_005
    assert episode_seed(0, 999) < episode_seed(1, 0)


def test_train_one_update_per_epoch(specs):
    pipe = build_pipeline(specs["myaliensv1"], config_for("myaliensv1"), seed=0, warmup_steps=100)
    assert pipe.actions == ("none", "left", "right")
    calls = []
    q, curve = qlearner.train(pipe.env, pipe.encoder, pipe.perception, pipe.profile,
                              LearnerConfig(decay_steps=150), 300, eval_interval=100,
                              on_interval=lambda epoch, table: calls.append(epoch))
    assert q.updates() == 300
    assert len(q) > 0
    assert calls == [100, 200, 300]
    assert all(epoch <= 300 for epoch, _ in curve)


def test_greedy_evaluation_reports_novel_states(specs):
    pipe = build_pipeline(specs["myaliensv1"], config_for("myaliensv1"), seed=0, warmup_steps=50)
    scores, novel = qlearner.evaluate_greedy(pipe.env, pipe.encoder, pipe.perception.model, QTable(),
                                             pipe.actions, [10_000])
    assert len(scores) == 1
    assert novel == 1.0


def test_action_set_keeps_one_idle_key():
    profile = AgentProfile(AppearanceSignature((0, 0, 0), (1, 1)), key_map={
        "none": KeyAction.NO_EFFECT, "up": KeyAction.NO_EFFECT, "left": KeyAction.MOVE_LEFT, "space": KeyAction.FIRE})
    assert action_set(profile, ("none", "up", "left", "space")) == ("none", "left", "space")
