"""Self-checks run by ``mecmig verify``: solver, linearization, gradients, environment."""
from __future__ import annotations

import itertools
import time
from typing import NamedTuple

import numpy as np

from .env import feasible, repair
from .neural import gradient_check, init_network
from .scenario import random_instance
from .solver import brute_force, dp_solve, linearize, validate_linearization

SIZES = [(2, 2, 3), (3, 2, 2), (2, 3, 2)]


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_solvers(n_instances: int, seed: int = 0) -> Check:
    start = time.perf_counter()
    worst = 0.0
    for i in range(n_instances):
        inst = random_instance(seed * 100_003 + i, *SIZES[i % len(SIZES)])
        a, b = dp_solve(inst).value, brute_force(inst).value
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    elapsed = time.perf_counter() - start
    return Check("dp_vs_brute_force", worst <= 1e-9,
                 f"{n_instances} instances, max rel err {worst:.2e}, {elapsed:.1f}s")


def check_linearization(n_pairs: int, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    failures = 0
    for i in range(n_pairs):
        N, K, T = SIZES[i % len(SIZES)]
        inst = random_instance(seed * 100_003 + 10_000 + i, N, K, T)
        traj = [tuple(int(v) for v in rng.integers(0, N, size=K)) for _ in range(T)]
        failures += not validate_linearization(inst, traj).ok
    inst = random_instance(seed, 2, 2, 2)
    prog = linearize(inst)
    K, N, T = 2, 2, 2
    counts_ok = (prog.count("z_le_prev") == K * N * N * (T - 1)
                 and prog.count("z_le_cur") == K * N * N * T
                 and prog.count("z_ge_both") == K * N * N * (T - 1)
                 and len(prog.variables("z_")) == K * N * N * T)
    return Check("linearization", failures == 0 and counts_ok,
                 f"{n_pairs} trajectories, {failures} mismatches, counts {'ok' if counts_ok else 'WRONG'}")


def check_gradients(n_nets: int, full_size: bool, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_nets):
        if full_size:
            K = int(rng.integers(2, 5))
            sizes, samples = (9 * K, 256, 256, 2**K), 60
        else:
            sizes, samples = tuple(int(s) for s in rng.integers(1, 8, size=4)), None
        net = init_network(sizes, rng)
        for b in net.biases:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        x = rng.uniform(-1, 1, size=(3, sizes[0]))
        y = rng.normal(size=(3, sizes[-1]))
        worst = max(worst, gradient_check(net, x, y, samples=samples, rng=rng))
    arch = "9K-256-256-2^K" if full_size else "small"
    return Check(f"gradients_{'full' if full_size else 'small'}", worst < 1e-4,
                 f"{n_nets} {arch} nets, max rel err {worst:.2e}")


def check_environment(n_actions: int, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n_actions):
        N, K = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        ja = [int(a) for a in rng.integers(0, 2**K, size=N)]
        oracle = all(sum((a >> k) & 1 for a in ja) == 1 for k in range(K))
        bad += feasible(ja, K) != oracle
        q = rng.normal(size=(N, 2**K))
        fixed = repair(ja, q)
        bad += not feasible(fixed, K) or repair(fixed, q) != fixed
    return Check("environment", bad == 0, f"{n_actions} joint actions, {bad} disagreements")


def run_all(quick: bool = False, seed: int = 0) -> list[Check]:
    return [
        check_solvers(10 if quick else 50, seed),
        check_linearization(20 if quick else 100, seed),
        check_gradients(5 if quick else 20, full_size=False, seed=seed),
        check_gradients(2 if quick else 20, full_size=True, seed=seed),
        check_environment(2_000 if quick else 20_000, seed),
    ]
