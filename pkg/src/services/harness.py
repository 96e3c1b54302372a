import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from tqdm import tqdm

from src import __version__
from src.models.errors import NotApplicable
from src.models.experiment import VARIANT_ORDER, Algorithm, EvalPoint, ExperimentConfig, RunRecord
from src.models.game_spec import GameSpec, VariantKind, VariantName
from src.models.learner_config import DQNConfig, LearnerConfig
from src.services import dqn, qlearner
from src.services.encoder import config_for
from src.services.engine import GameEnv
from src.services.gamespec import BUILTIN_GAMES, apply_variant, resolve_spec
from src.services.perception import export_model
from src.services.pipeline import build_pipeline
from src.services.report import emit_curves, table_fragment

logger = logging.getLogger(__name__)


def normalized_score(actual: float, max_achievable: float) -> float:
    if max_achievable <= 0:
        raise ValueError(f"maximum achievable score must be positive, got {max_achievable}")
    return actual / max_achievable


def random_rollouts(env: GameEnv, seeds: Iterable[int]) -> List[float]:
    """Full episodes with keys drawn uniformly, one generator per seed."""
    scores = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        env.reset(seed=seed)
        while not env.step(env.keys[int(rng.integers(len(env.keys)))]).done:
            pass
        scores.append(float(env.score))
    return scores


def _point(epoch: int, per_seed_scores: Sequence[Sequence[float]], max_score: int,
           novel: float = 0.0) -> EvalPoint:
    scores = tuple(s for run in per_seed_scores for s in run)
    normalized = tuple(normalized_score(s, max_score) for s in scores)
    return EvalPoint(
        epoch=epoch,
        scores=scores,
        normalized=normalized,
        mean_score=float(np.mean(scores)),
        mean_normalized=float(np.mean(normalized)),
        novel_state_fraction=novel,
        per_seed=tuple(float(np.mean([normalized_score(s, max_score) for s in run])) for run in per_seed_scores),
    )


def eval_spec_for(cfg: ExperimentConfig, spec: GameSpec) -> GameSpec:
    return apply_variant(spec, VariantKind.from_name(cfg.variant.value, seed=cfg.variant_seed))


def _epochs_to_points(collected: Dict[int, List[Tuple[List[float], float]]], max_score: int) -> List[EvalPoint]:
    points = []
    for epoch in sorted(collected):
        runs = collected[epoch]
        novel = float(np.mean([n for _, n in runs])) if runs else 0.0
        points.append(_point(epoch, [scores for scores, _ in runs], max_score, novel))
    return points


def _run_qlearn(cfg: ExperimentConfig, spec: GameSpec, eval_spec: GameSpec, config: Dict[str, Any],
                progress: bool) -> Tuple[List[EvalPoint], Dict[str, str]]:
    encoder_config = config_for(cfg.game, cfg.k, cfg.expert_wide, config.get("encoder", {}).get("max_k", 8))
    collected: Dict[int, List[Tuple[List[float], float]]] = {}
    artifacts: Dict[str, str] = {}
    for seed in cfg.seeds:
        train_pipe = build_pipeline(spec, encoder_config, seed, cfg.warmup_steps, config)
        eval_pipe = build_pipeline(eval_spec, encoder_config, seed, cfg.warmup_steps, config)
        frozen = eval_pipe.perception.freeze()
        actions = train_pipe.actions

        def evaluate(epoch: int, q: qlearner.QTable):
            scores, novel = qlearner.evaluate_greedy(eval_pipe.env, eval_pipe.encoder, frozen, q, actions,
                                                     cfg.eval_seeds())
            collected.setdefault(epoch, []).append((scores, novel))
            logger.debug("%s seed %d epoch %d: mean score %.2f", cfg.cell_name, seed, epoch, np.mean(scores))

        learner_cfg = LearnerConfig.from_config(config, epochs=cfg.epochs, seed=seed)
        if cfg.epochs == 0:
            evaluate(0, qlearner.QTable())
            q = qlearner.QTable()
        else:
            q, _ = qlearner.train(train_pipe.env, train_pipe.encoder, train_pipe.perception, train_pipe.profile,
                                  learner_cfg, cfg.epochs, cfg.eval_interval, evaluate, progress)
        meta = {"game": cfg.game, "k": str(encoder_config.k), "seed": str(seed)}
        artifacts[f"qtable_seed{seed}.txt"] = qlearner.export_table(q, actions, meta)
        artifacts[f"categories_seed{seed}.txt"] = export_model(train_pipe.perception.model)
        artifacts[f"bias_report_seed{seed}.txt"] = train_pipe.report.render() + "\n" + \
            train_pipe.profile.render_key_map() + "\n"
    return _epochs_to_points(collected, spec.max_score), artifacts


def _run_dqn(cfg: ExperimentConfig, spec: GameSpec, eval_spec: GameSpec, config: Dict[str, Any],
             progress: bool) -> Tuple[List[EvalPoint], Dict[str, dqn.DenseNet]]:
    collected: Dict[int, List[Tuple[List[float], float]]] = {}
    nets: Dict[str, dqn.DenseNet] = {}
    for seed in cfg.seeds:
        dqn_cfg = DQNConfig.from_config(config, epochs=cfg.epochs, seed=seed)
        eval_env = GameEnv(eval_spec, seed=seed)

        def evaluate(epoch: int, net: dqn.DenseNet):
            scores = dqn.evaluate_dqn(eval_env, net, cfg.eval_seeds(), dqn_cfg.cell_px)
            collected.setdefault(epoch, []).append((scores, 0.0))

        learner = dqn.DQNLearner(GameEnv(spec, seed=seed), dqn_cfg)
        if cfg.epochs == 0:
            evaluate(0, learner.net)
        else:
            learner.train(cfg.epochs, cfg.eval_interval, evaluate, progress)
        nets[f"dqn_seed{seed}.ckpt"] = learner.net
    return _epochs_to_points(collected, spec.max_score), nets


def run_experiment(cfg: ExperimentConfig, config: Optional[Dict[str, Any]] = None,
                   specs_dir: Optional[str] = None, progress: bool = False) -> RunRecord:
    """Train on the base game, evaluate on the configured variant and write the cell's outputs."""
    config = config or {}
    started = time.time()
    spec = resolve_spec(cfg.game, specs_dir)
    assert cfg.train_variant is VariantName.BASE
    record = RunRecord(config=cfg, max_score=spec.max_score)
    try:
        eval_spec = eval_spec_for(cfg, spec)
    except NotApplicable as exc:
        logger.warning("%s: %s", cfg.cell_name, exc)
        record.skipped, record.reason = True, str(exc)
        _write_outputs(record, {}, {}, started)
        return record

    logger.info("running %s for %d epochs", cfg.cell_name, cfg.epochs)
    artifacts: Dict[str, str] = {}
    nets: Dict[str, dqn.DenseNet] = {}
    if cfg.algorithm is Algorithm.RANDOM:
        env = GameEnv(eval_spec)
        record.points = [_point(0, [random_rollouts(env, cfg.eval_seeds())], spec.max_score)]
    elif cfg.algorithm is Algorithm.QLEARN:
        record.points, artifacts = _run_qlearn(cfg, spec, eval_spec, config, progress)
    else:
        record.points, nets = _run_dqn(cfg, spec, eval_spec, config, progress)
    if record.final is not None:
        logger.info("%s: mean normalized score %.3f", cfg.cell_name, record.final.mean_normalized)
    _write_outputs(record, artifacts, nets, started)
    return record


def _write_outputs(record: RunRecord, artifacts: Dict[str, str], nets: Dict[str, dqn.DenseNet], started: float):
    cfg = record.config
    record.metadata = {
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_clock_seconds": round(time.time() - started, 3),
        "skipped": record.skipped,
        "reason": record.reason,
    }
    if not cfg.output_dir:
        return
    cell_dir = os.path.join(cfg.output_dir, cfg.cell_name)
    os.makedirs(cell_dir, exist_ok=True)
    with open(os.path.join(cell_dir, "metadata.yaml"), "w") as f:
        yaml.safe_dump(record.metadata, f, sort_keys=True)
    emit_curves(record).to_csv(os.path.join(cell_dir, "curve.csv"), index=False, float_format="%.6f")
    table_fragment(record).to_csv(os.path.join(cell_dir, "fragment.csv"), index=False, float_format="%.6f")
    for name, text in artifacts.items():
        with open(os.path.join(cell_dir, name), "w") as f:
            f.write(text)
    for name, net in nets.items():
        dqn.save_checkpoint(net, os.path.join(cell_dir, name))


def full_grid(config: Dict[str, Any], output_dir: Optional[str] = None, games: Sequence[str] = BUILTIN_GAMES,
              **overrides) -> List[ExperimentConfig]:
    """Every cell of the score table: a random row per game, then DQN and ours per variant."""
    cells = []
    for game in games:
        cells.append(ExperimentConfig.from_config(config, game, algorithm=Algorithm.RANDOM, epochs=0,
                                                  output_dir=output_dir))
        for variant in VARIANT_ORDER:
            for algorithm in (Algorithm.DQN, Algorithm.QLEARN):
                cells.append(ExperimentConfig.from_config(config, game, algorithm=algorithm, variant=variant,
                                                          output_dir=output_dir, **overrides))
    return cells


def _run_cell(args) -> RunRecord:
    cfg, config, specs_dir = args
    return run_experiment(cfg, config, specs_dir)


def bench(cells: Sequence[ExperimentConfig], config: Optional[Dict[str, Any]] = None,
          specs_dir: Optional[str] = None, workers: int = 1, progress: bool = False) -> List[RunRecord]:
    """Run independent cells, optionally in a process pool, and return records in cell order."""
    jobs = [(cfg, config or {}, specs_dir) for cfg in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, jobs))
    return [_run_cell(job) for job in tqdm(jobs, desc="bench", disable=not progress)]
