import os

import pandas as pd
import pytest
import yaml

from src.models.errors import ConfigError
from src.models.experiment import Algorithm, ExperimentConfig
from src.models.game_spec import VariantName
from src.services.engine import GameEnv
from src.services.harness import bench, full_grid, normalized_score, random_rollouts, run_experiment
from src.utils.config import load_config


def test_normalized_score():
    assert normalized_score(25, 50) == 0.5
    assert normalized_score(-10, 50) == -0.2
    assert normalized_score(30, 30) == 1.0
    with pytest.raises(ValueError):
        normalized_score(1, 0)


def test_random_rollouts_are_reproducible(specs):
    env = GameEnv(specs["myaliensv1"])
    first = random_rollouts(env, [1, 2])
    assert len(first) == 2
    assert random_rollouts(env, [1, 2]) == first


def test_experiment_config_from_config():
    config = load_config(None)
    cfg = ExperimentConfig.from_config(config, "roadrash", algorithm="dqn", variant="mod-image", eval_runs=3,
                                       k=None)
    assert cfg.epochs == config["harness"]["dqn_epochs"]
    assert cfg.variant is VariantName.MOD_IMAGE
    assert cfg.k is None
    assert cfg.cell_name == "roadrash__mod-image__dqn"
    assert cfg.eval_seeds() == [10000, 10001, 10002]
    assert cfg.train_variant is VariantName.BASE
    assert cfg.to_dict()["variant"] == "mod-image"


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(game="roadrash", eval_runs=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(game="roadrash", seeds=())


def test_not_applicable_cell_is_recorded(tmp_path):
    cfg = ExperimentConfig(game="roadrash", variant=VariantName.MOD_POSITION, epochs=10, output_dir=str(tmp_path))
    record = run_experiment(cfg)
    assert record.skipped
    assert "not applicable" in record.reason
    cell = tmp_path / cfg.cell_name
    fragment = pd.read_csv(cell / "fragment.csv", keep_default_na=False)
    assert fragment.loc[0, "status"] == "NA"
    metadata = yaml.safe_load((cell / "metadata.yaml").read_text())
    assert metadata["skipped"] is True


def test_random_cell_outputs_are_deterministic(tmp_path):
    texts = []
    for name in ("a", "b"):
        cfg = ExperimentConfig(game="myaliensv1", algorithm=Algorithm.RANDOM, epochs=0, eval_runs=3,
                               output_dir=str(tmp_path / name))
        record = run_experiment(cfg)
        assert len(record.points) == 1
        point = record.final
        assert len(point.scores) == 3
        assert point.mean_normalized == pytest.approx(sum(point.scores) / 3 / 50)
        texts.append((tmp_path / name / cfg.cell_name / "curve.csv").read_text())
    assert texts[0] == texts[1]
    assert texts[0].splitlines()[0] == "epoch,mean_normalized,seed_0,novel_state_fraction"


def test_qlearn_cell_writes_curve_and_artifacts(tmp_path):
    cfg = ExperimentConfig(game="roadrash", epochs=200, eval_interval=100, eval_runs=2, warmup_steps=100,
                           output_dir=str(tmp_path))
    record = run_experiment(cfg)
    assert [p.epoch for p in record.points] == [100, 200]
    assert all(len(p.scores) == 2 for p in record.points)
    cell = tmp_path / cfg.cell_name
    for name in ("metadata.yaml", "curve.csv", "fragment.csv", "qtable_seed0.txt", "categories_seed0.txt",
                 "bias_report_seed0.txt"):
        assert (cell / name).exists(), name
    assert (cell / "qtable_seed0.txt").read_text().startswith("# actions: none left right")
    curve = pd.read_csv(cell / "curve.csv")
    assert list(curve["epoch"]) == [100, 200]


@pytest.mark.parametrize("variant", [VariantName.MOD_IMAGE, VariantName.MOD_COLORSIZE])
def test_tabular_scores_do_not_change_with_appearance(variant):
    common = dict(game="roadrash", epochs=300, eval_interval=300, eval_runs=2, warmup_steps=150)
    base = run_experiment(ExperimentConfig(**common))
    changed = run_experiment(ExperimentConfig(variant=variant, **common))
    assert not changed.skipped
    assert changed.final.scores == base.final.scores


def test_full_grid_covers_every_cell():
    cells = full_grid(load_config(None), epochs=5)
    assert len(cells) == 4 * (1 + 4 * 2)
    assert len({c.cell_name for c in cells}) == len(cells)
    random_cells = [c for c in cells if c.algorithm is Algorithm.RANDOM]
    assert len(random_cells) == 4
    assert all(c.epochs == 5 for c in cells if c.algorithm is not Algorithm.RANDOM)


def test_bench_keeps_cell_order(tmp_path):
    cells = [ExperimentConfig(game=g, algorithm=Algorithm.RANDOM, epochs=0, eval_runs=1, output_dir=str(tmp_path))
             for g in ("roadrash", "myaliensv1")]
    records = bench(cells)
    assert [r.config.game for r in records] == ["roadrash", "myaliensv1"]
    assert sorted(os.listdir(tmp_path)) == ["myaliensv1__base__random", "roadrash__base__random"]


@pytest.mark.slow
def test_dqn_cell_writes_checkpoint(tmp_path):
    cfg = ExperimentConfig(game="roadrash", algorithm=Algorithm.DQN, epochs=400, eval_interval=200, eval_runs=1,
                           output_dir=str(tmp_path))
    record = run_experiment(cfg, {"dqn": {"hidden": [16], "capacity": 500, "target_sync": 50}})
    assert [p.epoch for p in record.points] == [200, 400]
    assert (tmp_path / cfg.cell_name / "dqn_seed0.ckpt").exists()
