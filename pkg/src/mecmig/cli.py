"""Command-line entry point: ``mecmig <command> [--config FILE] [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .dql import DqlConfig, episode_seed, infer, load_checkpoint, save_checkpoint, train
from .env import MigrationEnv
from .scenario import ScenarioConfig, realize
from .solver import export_lp

log = logging.getLogger("mecmig")


class ConfigError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = argparse.ArgumentParser(prog="mecmig", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train one double-DQN per MEC server")
    t.add_argument("--episodes", type=int)
    t.add_argument("--horizon", type=int)

    i = sub.add_parser("infer", parents=[common], help="greedy inference with trained networks")
    i.add_argument("--checkpoint", type=Path, required=True)
    i.add_argument("--episodes", type=int, default=20)

    o = sub.add_parser("optimal", parents=[common], help="solve the realized instance exactly")
    o.add_argument("--horizon", type=int)

    s = sub.add_parser("sweep", parents=[common], help="cores or request-size sweep")
    s.add_argument("--axis", choices=["cores", "request"], required=True)
    s.add_argument("--replications", type=int, default=10)
    s.add_argument("--checkpoint", type=Path, help="also evaluate trained networks")
    s.add_argument("--workers", type=int, default=1)

    e = sub.add_parser("export-lp", parents=[common], help="write the linearized integer program")
    e.add_argument("--horizon", type=int)
    e.add_argument("--big-m", type=float)

    v = sub.add_parser("verify", parents=[common], help="run solver, linearization and gradient checks")
    v.add_argument("--quick", action="store_true")
    return p


def load_config(args) -> ScenarioConfig:
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file not found: {args.config}")
        cfg = ScenarioConfig.load(args.config)
    else:
        cfg = ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_train(cfg: ScenarioConfig, args) -> int:
    overrides = {}
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    dc = DqlConfig.from_scenario(cfg, **overrides)
    result = train(dc, MigrationEnv(cfg, horizon=dc.horizon), progress=True)
    harness.write_csv(result.reward_log, args.out / "reward_log.csv", harness.REWARD_COLUMNS)
    (args.out / "reward_log.gp").write_text(
        harness.gnuplot_script("reward", "reward_log.csv", cfg.n_servers))
    save_checkpoint(result.agents, args.out / "checkpoint.json")
    return 0


def cmd_infer(cfg: ScenarioConfig, args) -> int:
    nets = [a.main for a in load_checkpoint(args.checkpoint)]
    seeds = [episode_seed(cfg.seed, i, harness.EVAL_STREAM) for i in range(args.episodes)]
    result = infer(nets, MigrationEnv(cfg, horizon=cfg.eval_horizon), seeds)
    rows = [{"seed": s, "horizon": cfg.eval_horizon, **o._asdict()}
            for s, o in zip(result.seeds, result.objectives)]
    harness.write_csv(rows, args.out / "inference.csv", harness.OBJECTIVE_COLUMNS)
    mean, std = result.mean(), result.std()
    print(f"mean total {mean.total:.6g} (std {std.total:.3g}); "
          f"{result.conflicts}/{result.slots} slots repaired")
    return 0


def cmd_optimal(cfg: ScenarioConfig, args) -> int:
    rec = harness.run_optimal(cfg, horizon=args.horizon)
    harness.write_csv([rec.row()], args.out / "objective.csv", harness.OBJECTIVE_COLUMNS)
    print(f"optimal total {rec.total:.6g}")
    return 0


def cmd_sweep(cfg: ScenarioConfig, args) -> int:
    nets = [a.main for a in load_checkpoint(args.checkpoint)] if args.checkpoint else None
    spec = harness.SweepSpec(args.axis, replications=args.replications)
    rows = harness.run_sweep(cfg, spec, nets, workers=args.workers)
    harness.write_csv(rows, args.out / "sweep.csv", harness.SWEEP_COLUMNS)
    harness.write_csv(harness.summarize_sweep(rows), args.out / "sweep_summary.csv",
                      harness.SUMMARY_COLUMNS)
    (args.out / "sweep.gp").write_text(harness.gnuplot_script("sweep", "sweep_summary.csv"))
    return 0


def cmd_export_lp(cfg: ScenarioConfig, args) -> int:
    inst = realize(cfg, cfg.seed, args.horizon or cfg.eval_horizon).instance
    (args.out / "problem.lp").write_text(export_lp(inst, args.big_m))
    return 0


def cmd_verify(cfg: ScenarioConfig, args) -> int:
    from .verify import run_all

    failed = 0
    for check in run_all(quick=args.quick, seed=cfg.seed):
        print(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
        failed += not check.passed
    return 1 if failed else 0


COMMANDS = {"train": cmd_train, "infer": cmd_infer, "optimal": cmd_optimal, "sweep": cmd_sweep,
            "export-lp": cmd_export_lp, "verify": cmd_verify}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"mecmig: error: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
