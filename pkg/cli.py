import argparse
import json
import logging
import os
import sys

from src.models.errors import ArtifactFormatError, ConfigError, GameSuiteError
from src.models.experiment import Algorithm, ExperimentConfig
from src.models.game_spec import VariantKind, VariantName
from src.models.learner_config import DQNConfig, IdentifyConfig
from src.services import dqn, engine, qlearner
from src.services.agent_id import identify_and_bind
from src.services.encoder import config_for
from src.services.engine import GameEnv
from src.services.gamespec import apply_variant, load_spec, resolve_spec, serialize
from src.services.harness import bench, full_grid, normalized_score, run_experiment
from src.services.perception import import_model
from src.services.pipeline import build_pipeline
from src.services.report import write_table
from src.utils.config import load_config
from src.utils.exports import write_ppm, write_trace

logger = logging.getLogger("gamesuite")

VARIANTS = [v.value for v in VariantName]


def _spec_for(args, config):
    spec = resolve_spec(args.game, config["paths"]["specs_dir"])
    if getattr(args, "variant", "base") != "base":
        spec = apply_variant(spec, VariantKind.from_name(args.variant, seed=config["harness"]["variant_seed"]))
    return spec


def cmd_identify(args, config):
    spec = _spec_for(args, config)
    env = GameEnv(spec, seed=args.seed)
    profile, report = identify_and_bind(env, IdentifyConfig.from_config(config), args.seed)
    print(report.render())
    print(profile.render_key_map())
    if args.frames:
        env.reset(seed=args.seed)
        path = os.path.join(args.frames, f"{spec.name}_{args.variant}_seed{args.seed}.ppm")
        write_ppm(engine.render(env.state, config["engine"]["cell_px"]), path)
        print(f"first frame written to {path}")


def _dump_episode(env: GameEnv, out_dir: str, cell_px: int, replay) -> str:
    """Replay one evaluation episode with the step trace on; writes trace.jsonl and the final frame."""
    env.record_trace = True
    try:
        replay()
    finally:
        env.record_trace = False
    path = os.path.join(out_dir, "trace.jsonl")
    write_trace(env.trace, path)
    write_ppm(engine.render(env.state, cell_px), os.path.join(out_dir, "last.ppm"))
    logger.info("%d steps traced to %s", len(env.trace), path)
    return path


def cmd_train(args, config):
    cfg = ExperimentConfig.from_config(
        config, args.game,
        algorithm=args.algo, variant=args.variant, epochs=args.epochs,
        seeds=(args.seed,) if args.seed is not None else None,
        eval_runs=args.runs, k=args.k, expert_wide=args.expert_wide,
        output_dir=args.out or config["paths"]["output_root"],
    )
    record = run_experiment(cfg, config, config["paths"]["specs_dir"], progress=config["logging"]["progress"])
    final = record.final
    print(json.dumps({
        "cell": cfg.cell_name,
        "skipped": record.skipped,
        "mean_normalized": None if final is None else round(final.mean_normalized, 6),
        "output": os.path.join(cfg.output_dir, cfg.cell_name),
    }))


def cmd_eval(args, config):
    spec = _spec_for(args, config)
    base_max = resolve_spec(args.game, config["paths"]["specs_dir"]).max_score
    seeds = [config["harness"]["eval_seed_base"] + i for i in range(args.runs)]
    cell_px = config["engine"]["cell_px"]
    if args.model.endswith(".ckpt"):
        if args.categories:
            raise ConfigError("--categories applies to q-tables; the DQN baseline reads pixels only")
        net = dqn.load_checkpoint(args.model)
        env, px = GameEnv(spec), DQNConfig.from_config(config).cell_px
        scores = dqn.evaluate_dqn(env, net, seeds, px)
        novel = 0.0

        def replay():
            dqn.evaluate_dqn(env, net, seeds[:1], px)
    else:
        with open(args.model, "r") as f:
            q, actions, meta = qlearner.import_table(f.read())
        if meta.get("game", args.game) != args.game:
            raise ArtifactFormatError(f"{args.model} was trained on {meta['game']}, not {args.game}")
        k = int(meta["k"]) if "k" in meta else args.k
        encoder_config = config_for(args.game, k, True)
        model = None
        if args.categories:
            with open(args.categories, "r") as f:
                model = import_model(f.read())
        pipe = build_pipeline(spec, encoder_config, int(meta.get("seed", 0)),
                              config["harness"]["warmup_steps"], config, model)
        env, frozen = pipe.env, pipe.perception.freeze()
        scores, novel = qlearner.evaluate_greedy(env, pipe.encoder, frozen, q, actions, seeds)

        def replay():
            qlearner.evaluate_greedy(env, pipe.encoder, frozen, q, actions, seeds[:1])
    trace = _dump_episode(env, args.dump_trace, cell_px, replay) if args.dump_trace else None
    mean = sum(scores) / len(scores)
    print(json.dumps({
        "game": args.game,
        "variant": args.variant,
        "runs": len(scores),
        "mean_score": mean,
        "mean_normalized": normalized_score(mean, base_max),
        "novel_state_fraction": novel,
        "trace": trace,
    }))


def cmd_bench(args, config):
    out = args.out or config["paths"]["output_root"]
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.runs is not None:
        overrides["eval_runs"] = args.runs
    cells = full_grid(config, out, **overrides)
    if not args.full:
        cells = [c for c in cells if c.algorithm is not Algorithm.DQN]
    records = bench(cells, config, config["paths"]["specs_dir"], workers=args.workers,
                    progress=config["logging"]["progress"])
    print(write_table(records, out))


def cmd_spec(args, config):
    if args.action == "parse":
        print(serialize(load_spec(args.target)), end="")
    else:
        spec = resolve_spec(args.target, config["paths"]["specs_dir"])
        print(serialize(apply_variant(spec, VariantKind.from_name(args.variant, seed=args.seed))), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamesuite", description="Object-category game playing experiments")
    parser.add_argument("--config", default="config.yaml", help="YAML configuration file")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--quiet", action="store_true", help="disable progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="identify the agent and print the bias report and key map")
    p.add_argument("game")
    p.add_argument("--variant", choices=VARIANTS, default="base")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", default=None, metavar="DIR", help="write the first frame as a PPM into DIR")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("train", help="train one experiment cell")
    p.add_argument("--game", required=True)
    p.add_argument("--algo", choices=[a.value for a in Algorithm], default="qlearn")
    p.add_argument("--variant", choices=VARIANTS, default="base", help="variant to evaluate on")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--expert-wide", action="store_true", help="allow k above the configured maximum")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate an exported q-table or DQN checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--game", required=True)
    p.add_argument("--variant", choices=VARIANTS, default="base")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--categories", default=None, metavar="PATH", help="category table exported by train")
    p.add_argument("--dump-trace", default=None, metavar="DIR",
                   help="replay the first evaluation episode into DIR/trace.jsonl and DIR/last.ppm")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run the score-table grid")
    p.add_argument("--full", action="store_true", help="include the DQN columns")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("spec", help="game description tooling")
    p.add_argument("action", choices=["parse", "variant"])
    p.add_argument("target", help="a .game file for parse, a game name or file for variant")
    p.add_argument("--variant", choices=VARIANTS, default="mod-position")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_spec)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.quiet:
            config["logging"]["progress"] = False
        logging.basicConfig(
            level=(args.log_level or config["logging"]["level"]).upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        args.func(args, config)
    except GameSuiteError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:
        logger.exception("unexpected failure")
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
