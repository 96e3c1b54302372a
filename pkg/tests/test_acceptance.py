import numpy as np
import pytest

from src.models.agent_profile import KeyAction
from src.models.categories import AppearanceSignature
from src.models.errors import NotApplicable
from src.models.experiment import Algorithm, ExperimentConfig, VARIANT_ORDER
from src.models.game_spec import VariantKind, VariantName
from src.models.learner_config import IdentifyConfig
from src.services.agent_id import identify_and_bind
from src.services.engine import GameEnv
from src.services.gamespec import BUILTIN_GAMES, apply_variant
from src.services.harness import normalized_score, random_rollouts, run_experiment

EXPECTED_KEYS = {
    "myaliensv1": {"none": KeyAction.NO_EFFECT, "left": KeyAction.MOVE_LEFT, "right": KeyAction.MOVE_RIGHT},
    "myaliensv2": {"none": KeyAction.NO_EFFECT, "left": KeyAction.MOVE_LEFT, "right": KeyAction.MOVE_RIGHT},
    "roadrash": {"none": KeyAction.NO_EFFECT, "left": KeyAction.MOVE_LEFT, "right": KeyAction.MOVE_RIGHT},
    "spaceinvaders": {"none": KeyAction.NO_EFFECT, "left": KeyAction.MOVE_LEFT, "right": KeyAction.MOVE_RIGHT,
                      "space": KeyAction.FIRE},
}
# the full training protocol: 5x10^5 epochs, 20 greedy evaluation runs
TRAINED = dict(epochs=500_000, eval_interval=500_000, eval_runs=20)


def test_random_policy_loses_the_first_myaliens_level(specs):
    scores = random_rollouts(GameEnv(specs["myaliensv1"]), range(10_000, 10_100))
    mean = float(np.mean([normalized_score(s, 50) for s in scores]))
    assert -0.25 <= mean <= -0.15


def test_random_policy_loses_the_first_myaliensv2_level(specs):
    scores = random_rollouts(GameEnv(specs["myaliensv2"]), range(10_000, 10_100))
    mean = float(np.mean([normalized_score(s, 30) for s in scores]))
    assert abs(mean + 10 / 30) <= 0.05


def test_qlearn_cell_reruns_byte_identical(tmp_path):
    texts = []
    for name in ("first", "second"):
        cfg = ExperimentConfig(game="myaliensv1", epochs=300, eval_interval=150, eval_runs=2, warmup_steps=100,
                               output_dir=str(tmp_path / name))
        run_experiment(cfg)
        cell = tmp_path / name / cfg.cell_name
        texts.append(((cell / "curve.csv").read_bytes(), (cell / "qtable_seed0.txt").read_bytes()))
    assert texts[0] == texts[1]


@pytest.mark.slow
@pytest.mark.parametrize("game", BUILTIN_GAMES)
@pytest.mark.parametrize("variant", VARIANT_ORDER)
def test_agent_and_keys_recovered_on_every_variant(specs, game, variant):
    spec = specs[game]
    try:
        spec = apply_variant(spec, VariantKind.from_name(variant.value, seed=7))
    except NotApplicable:
        pytest.skip(f"{variant.value} does not apply to {game}")
    profile, report = identify_and_bind(GameEnv(spec), IdentifyConfig(), seed=0)
    player = spec.class_def(spec.player_class)
    assert profile.signature == AppearanceSignature(player.color, player.size)
    assert profile.key_map == EXPECTED_KEYS[game]
    sizes = report.sizes()
    assert sizes == sorted(sizes, reverse=True)
    assert sizes[-1] == 1


@pytest.mark.slow
@pytest.mark.parametrize("game", BUILTIN_GAMES)
def test_appearance_variants_leave_tabular_scores_unchanged(game):
    common = dict(game=game, epochs=5000, eval_interval=5000, eval_runs=5, warmup_steps=500)
    base = run_experiment(ExperimentConfig(**common)).final.scores
    for variant in (VariantName.MOD_COLORSIZE, VariantName.MOD_IMAGE):
        record = run_experiment(ExperimentConfig(variant=variant, **common))
        if record.skipped:
            continue
        assert record.final.scores == base


@pytest.mark.slow
@pytest.mark.parametrize("game, bar", [("myaliensv1", 0.6), ("myaliensv2", 0.4), ("roadrash", 0.4)])
def test_trained_agent_clears_the_bar(game, bar):
    record = run_experiment(ExperimentConfig(game=game, **TRAINED))
    assert record.final.mean_normalized >= bar


@pytest.mark.slow
def test_trained_agent_clears_both_invader_levels():
    record = run_experiment(ExperimentConfig(game="spaceinvaders", **TRAINED))
    assert record.final.normalized == (1.0,) * 20


@pytest.mark.slow
def test_moved_invaders_score_below_base():
    base = run_experiment(ExperimentConfig(game="spaceinvaders", **TRAINED))
    moved = run_experiment(ExperimentConfig(game="spaceinvaders", variant=VariantName.MOD_POSITION, **TRAINED))
    assert moved.final.mean_normalized < base.final.mean_normalized
    assert moved.final.novel_state_fraction > 0


@pytest.mark.slow
def test_appearance_variants_move_pixel_scores_only():
    pixel_changed = []
    for game in ("myaliensv1", "roadrash", "spaceinvaders"):
        scores = {}
        for algorithm in (Algorithm.QLEARN, Algorithm.DQN):
            common = dict(game=game, algorithm=algorithm, epochs=5000, eval_interval=5000, eval_runs=5,
                          warmup_steps=500)
            scores[algorithm, VariantName.BASE] = run_experiment(ExperimentConfig(**common)).final.scores
            for variant in (VariantName.MOD_COLORSIZE, VariantName.MOD_IMAGE):
                record = run_experiment(ExperimentConfig(variant=variant, **common))
                if not record.skipped:
                    scores[algorithm, variant] = record.final.scores
        for (algorithm, variant), got in scores.items():
            base = scores[algorithm, VariantName.BASE]
            if algorithm is Algorithm.QLEARN:
                assert got == base
            elif variant is not VariantName.BASE:
                pixel_changed.append(got != base)
    assert any(pixel_changed)
