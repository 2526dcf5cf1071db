"""Experiment orchestration: optimal runs, parameter sweeps and data export."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dql import episode_seed, infer
from .env import MigrationEnv
from .model import evaluate_objective
from .neural import QNetwork
from .scenario import ScenarioConfig, realize
from .solver import SizeGuardError, dp_solve

__all__ = [
    "CORE_LEVELS", "REQUEST_BANDS", "ScenarioConfig", "SweepSpec", "OptimalRecord",
    "run_optimal", "run_sweep", "write_csv", "gnuplot_script",
]

CORE_LEVELS = (4, 8, 16, 32, 64)
REQUEST_BANDS = ((50, 100), (100, 150), (150, 200), (200, 250), (250, 300))
SWEEP_STREAM = 2
EVAL_STREAM = 1

OBJECTIVE_COLUMNS = ["seed", "horizon", "compute", "comm", "migration", "total"]
SWEEP_COLUMNS = ["axis", "level", "replication", "seed", "method",
                 "compute", "comm", "migration", "total"]
REWARD_COLUMNS = ["episode", "agent", "mean_reward", "epsilon"]


@dataclass(frozen=True)
class SweepSpec:
    axis: str  # "cores" or "request"
    levels: tuple = ()
    replications: int = 10

    def __post_init__(self):
        if self.axis not in ("cores", "request"):
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.levels:
            object.__setattr__(self, "levels", CORE_LEVELS if self.axis == "cores" else REQUEST_BANDS)
        if self.replications < 1:
            raise ValueError("need at least one replication")

    def configure(self, cfg: ScenarioConfig, level) -> ScenarioConfig:
        if self.axis == "cores":
            return cfg.replace(cores=int(level))
        return cfg.replace(request_kbits=tuple(float(v) for v in level))

    @staticmethod
    def label(level) -> str:
        return "-".join(str(v) for v in level) if isinstance(level, (tuple, list)) else str(level)


@dataclass(frozen=True)
class OptimalRecord:
    seed: int
    horizon: int
    compute: float
    comm: float
    migration: float
    total: float
    trajectory: tuple

    def row(self) -> dict:
        return {"seed": self.seed, "horizon": self.horizon, "compute": self.compute, "comm": self.comm,
                "migration": self.migration, "total": self.total}


def run_optimal(cfg: ScenarioConfig, seed: int | None = None, horizon: int | None = None) -> OptimalRecord:
    """Solve the realized instance for ``seed`` exactly."""
    seed = cfg.seed if seed is None else seed
    horizon = cfg.eval_horizon if horizon is None else horizon
    inst = realize(cfg, seed, horizon).instance
    try:
        sol = dp_solve(inst)
    except SizeGuardError as exc:
        raise SizeGuardError(f"{exc}; use export-lp and an external MILP solver instead") from exc
    value = evaluate_objective(sol.trajectory, inst)
    return OptimalRecord(seed, horizon, *value, sol.trajectory)


def _optimal_cell(args) -> dict:
    cfg, axis, level, rep, seed = args
    rec = run_optimal(cfg, seed)
    return {"axis": axis, "level": SweepSpec.label(level), "replication": rep, "seed": seed,
            "method": "optimal", "compute": rec.compute, "comm": rec.comm,
            "migration": rec.migration, "total": rec.total}


def run_sweep(cfg: ScenarioConfig, spec: SweepSpec, nets: Sequence[QNetwork] | None = None,
              workers: int = 1) -> list[dict]:
    """Optimal (and optionally learned-policy) objectives per level and replication.

    Replication ``r`` uses the same seed at every level, so each level sees
    the same fleet, fading and cost draws.
    """
    seeds = [episode_seed(cfg.seed, r, SWEEP_STREAM) for r in range(spec.replications)]
    cells = [(spec.configure(cfg, level), spec.axis, level, r, seed)
             for level in spec.levels for r, seed in enumerate(seeds)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_optimal_cell, cells))
    else:
        rows = [_optimal_cell(c) for c in cells]
    if nets is not None:
        for level in spec.levels:
            level_cfg = spec.configure(cfg, level)
            env = MigrationEnv(level_cfg, horizon=level_cfg.eval_horizon)
            result = infer(nets, env, seeds)
            for r, (seed, obj) in enumerate(zip(seeds, result.objectives)):
                rows.append({"axis": spec.axis, "level": spec.label(level), "replication": r,
                             "seed": seed, "method": "dql", "compute": obj.compute, "comm": obj.comm,
                             "migration": obj.migration, "total": obj.total})
    return rows


def level_means(rows: Iterable[dict], method: str = "optimal") -> dict[str, float]:
    sums: dict[str, list[float]] = {}
    for r in rows:
        if r["method"] == method:
            sums.setdefault(r["level"], []).append(r["total"])
    return {k: sum(v) / len(v) for k, v in sums.items()}


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def write_csv(rows: Iterable[dict], path: str | Path, columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({c: _fmt(r[c]) for c in columns})
    return path


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def summarize_sweep(rows: Sequence[dict]) -> list[dict]:
    """Wide per-level table: mean and spread of the total for each method."""
    levels = list(dict.fromkeys(r["level"] for r in rows))
    out = []
    for level in levels:
        row = {"level": level}
        for method in ("optimal", "dql"):
            vals = np.array([r["total"] for r in rows if r["level"] == level and r["method"] == method])
            row[f"{method}_mean"] = float(vals.mean()) if vals.size else float("nan")
            row[f"{method}_std"] = float(vals.std()) if vals.size else float("nan")
        out.append(row)
    return out


SUMMARY_COLUMNS = ["level", "optimal_mean", "optimal_std", "dql_mean", "dql_std"]


def gnuplot_script(kind: str, csv_name: str, n_agents: int = 3) -> str:
    """A gnuplot script for ``reward_log.csv`` or ``sweep_summary.csv``; nothing is rendered here."""
    head = ["set datafile separator ','", "set grid", "set terminal pngcairo size 800,500"]
    if kind == "reward":
        body = ["set output 'reward_log.png'", "set xlabel 'episode'", "set ylabel 'mean reward'",
                "set key bottom right",
                f"plot for [a=0:{n_agents - 1}] '{csv_name}' every ::1 using 1:($2==a ? $3 : 1/0) "
                "with lines title sprintf('agent %d', a)"]
    elif kind == "sweep":
        body = ["set output 'sweep.png'", "set xlabel 'level'", "set ylabel 'objective'",
                "set key top left",
                f"plot '{csv_name}' every ::1 using 0:2:3:xtic(1) with yerrorlines title 'optimal', \\",
                "     '' every ::1 using 0:4:5 with yerrorlines title 'DQL'"]
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return "\n".join(head + body) + "\n"
