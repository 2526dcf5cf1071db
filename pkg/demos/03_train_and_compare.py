"""Train the per-server agents briefly, then compare greedy inference with the exact optimum.

    python demos/03_train_and_compare.py [episodes] [horizon]

Runtime grows with episodes x horizon x 3 gradient steps (about 30 ms each on one core).
"""
import logging
import sys

import numpy as np

from mecmig.dql import DqlConfig, episode_seed, infer, train
from mecmig.env import MigrationEnv
from mecmig.harness import EVAL_STREAM
from mecmig.scenario import ScenarioConfig, realize
from mecmig.solver import dp_solve

logging.basicConfig(level=logging.INFO, format="%(message)s")
episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 60
horizon = int(sys.argv[2]) if len(sys.argv) > 2 else 20

cfg = ScenarioConfig()
dc = DqlConfig.from_scenario(cfg, episodes=episodes, horizon=horizon)
result = train(dc, MigrationEnv(cfg, horizon=horizon), progress=True)

window = max(1, episodes // 10)
for n in range(cfg.n_servers):
    r = result.mean_rewards(n)
    print(f"agent {n}: first {window} episodes {r[:window].mean():.4f}, last {window} {r[-window:].mean():.4f}")

seeds = [episode_seed(cfg.seed, i, EVAL_STREAM) for i in range(5)]
out = infer(result.nets, MigrationEnv(cfg, horizon=cfg.eval_horizon), seeds)
opt = [dp_solve(realize(cfg, s, cfg.eval_horizon).instance).value for s in seeds]
print(f"greedy total {out.mean().total:.4f} vs optimum {np.mean(opt):.4f} "
      f"({out.conflicts}/{out.slots} slots needed conflict repair)")
