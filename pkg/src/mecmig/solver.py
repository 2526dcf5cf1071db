"""Exact solvers for the placement/migration problem and its linearized form.

``dp_solve`` runs a forward dynamic program over slots whose state is the
complete assignment of vehicles to servers.  Migration costs only couple
consecutive slots and decompose per vehicle, so the min-plus transition is
applied one vehicle axis at a time.  ``brute_force`` enumerates every
trajectory and serves as the independent reference.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import Assignment, Instance, InvalidParameterError, evaluate_objective

BRUTE_FORCE_LIMIT = 10**7
DP_STATE_LIMIT = 10**5


class SizeGuardError(InvalidParameterError):
    pass


class Solution(NamedTuple):
    trajectory: tuple[Assignment, ...]
    value: float


def state_space(n_servers: int, n_vehicles: int) -> np.ndarray:
    """All assignments in lexicographic order; row index == state index."""
    return np.array(list(itertools.product(range(n_servers), repeat=n_vehicles)), dtype=np.int64)


def brute_force(inst: Instance) -> Solution:
    N, K, T = inst.n_servers, inst.n_vehicles, inst.horizon
    if N ** (K * T) > BRUTE_FORCE_LIMIT:
        raise SizeGuardError(f"{N}^({K}*{T}) trajectories exceed the brute-force limit")
    slots = list(itertools.product(range(N), repeat=K))
    best, best_value = None, math.inf
    for traj in itertools.product(slots, repeat=T):
        value = evaluate_objective(traj, inst).total
        if best is None or value < best_value:
            best, best_value = traj, value
    return Solution(tuple(best), best_value)


def _weighted(lam: float, arr: np.ndarray) -> np.ndarray:
    return lam * arr if lam else np.zeros_like(arr)


def stage_costs(inst: Instance, states: np.ndarray) -> np.ndarray:
    """lambda1 * compute + lambda2 * comm for every (slot, state); shape (T, S)."""
    N = inst.n_servers
    counts = (states[:, :, None] == np.arange(N)).sum(axis=1)  # (S, N)
    on = np.take_along_axis(counts, states, axis=1)  # services sharing each vehicle's server
    compute = (inst.cycles[None, :] * on / inst.capacity[states]).sum(axis=1)
    k_idx = np.arange(inst.n_vehicles)
    comm = inst.comm_delays[:, k_idx[None, :], states].sum(axis=2)  # (T, S)
    w = inst.weights
    return _weighted(w.compute, compute)[None, :] + _weighted(w.comm, comm)


def dp_solve(inst: Instance) -> Solution:
    N, K, T = inst.n_servers, inst.n_vehicles, inst.horizon
    if N**K > DP_STATE_LIMIT:
        raise SizeGuardError(f"{N}^{K} states per slot exceed the DP limit")
    states = state_space(N, K)
    S = len(states)
    stage = stage_costs(inst, states)
    lam = inst.weights.migration
    mig = lam * inst.migration if lam else np.zeros_like(inst.migration)

    def trans_to(t: int, prev_values: np.ndarray) -> np.ndarray:
        # min over previous states of prev_values + per-vehicle migration cost
        w = prev_values.reshape((N,) * K)
        for k in range(K):
            moved = np.moveaxis(w, k, -1)[..., :, None] + mig[:, :, k, t]
            w = np.moveaxis(moved.min(axis=-2), -1, k)
        return w.reshape(S)

    def trans_from(t: int, prev_values: np.ndarray, s: int) -> np.ndarray:
        return prev_values + mig[states, states[s], np.arange(K), t].sum(axis=1)

    init_idx = int(np.ravel_multi_index(inst.initial, (N,) * K))
    start = np.full(S, math.inf)
    start[init_idx] = 0.0
    values = [trans_to(0, start) + stage[0]]
    for t in range(1, T):
        values.append(trans_to(t, values[-1]) + stage[t])

    s = int(np.argmin(values[-1]))
    value = float(values[-1][s])
    path = [s]
    for t in range(T - 1, 0, -1):
        s = int(np.argmin(trans_from(t, values[t - 1], s)))
        path.append(s)
    path.reverse()
    return Solution(tuple(tuple(int(v) for v in states[i]) for i in path), value)


# --- linearized integer program -------------------------------------------------


def x_name(k: int, n: int, t: int) -> str:
    return f"x_k{k + 1}_n{n + 1}_t{t + 1}"


def z_name(k: int, src: int, dst: int, t: int) -> str:
    return f"z_k{k + 1}_{src + 1}to{dst + 1}_t{t + 1}"


def y_name(k: int, t: int) -> str:
    return f"y_k{k + 1}_t{t + 1}"


@dataclass
class Constraint:
    name: str
    family: str
    terms: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float

    def satisfied(self, values: dict[str, float], tol: float = 1e-9) -> bool:
        lhs = sum(c * values[v] for v, c in self.terms.items())
        scale = tol * max(1.0, abs(self.rhs))
        if self.sense == "<=":
            return lhs <= self.rhs + scale
        if self.sense == ">=":
            return lhs >= self.rhs - scale
        return abs(lhs - self.rhs) <= scale


@dataclass
class LinearizedProgram:
    binaries: list[str] = field(default_factory=list)
    continuous: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    fixed_zero: list[str] = field(default_factory=list)
    big_m: float = 0.0
    comments: list[str] = field(default_factory=list)

    def count(self, family: str) -> int:
        return sum(1 for c in self.constraints if c.family == family)

    def variables(self, prefix: str) -> list[str]:
        return [v for v in self.binaries + self.continuous if v.startswith(prefix)]

    def objective_value(self, values: dict[str, float]) -> float:
        return math.fsum(c * values[v] for v, c in self.objective.items())

    def violated(self, values: dict[str, float], tol: float = 1e-9) -> list[str]:
        bad = [c.name for c in self.constraints if not c.satisfied(values, tol)]
        bad += [v for v in self.fixed_zero if values[v] != 0]
        return bad

    def to_lp(self) -> str:
        lines = [f"\\ {c}" for c in self.comments]
        lines += ["Minimize", _wrap(" obj:", self.objective), "Subject To"]
        for c in self.constraints:
            lines.append(_wrap(f" {c.name}:", c.terms) + f" {c.sense} {_num(c.rhs)}")
        lines.append("Bounds")
        lines += [f" {v} >= 0" for v in self.continuous]
        lines += [f" {v} = 0" for v in self.fixed_zero]
        lines.append("Binary")
        lines += [f" {v}" for v in self.binaries]
        lines.append("End")
        return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    if v == 0:
        return "0"
    return format(v, ".17g")


def _wrap(head: str, terms: dict[str, float], width: int = 240) -> str:
    parts = [head]
    line_len = len(head)
    out = []
    for i, (v, c) in enumerate(terms.items()):
        sign = "-" if c < 0 else "+"
        tok = f" {sign} {_num(abs(c))} {v}" if (i or sign == "-") else f" {_num(c)} {v}"
        if line_len + len(tok) > width:
            out.append("".join(parts))
            parts, line_len = ["  "], 2
        parts.append(tok)
        line_len += len(tok)
    out.append("".join(parts))
    return "\n".join(out)


def default_big_m(inst: Instance) -> float:
    """Largest achievable per-vehicle compute delay in one slot."""
    return inst.n_vehicles * float(inst.cycles.max()) / float(inst.capacity.min())


def linearize(inst: Instance, big_m: float | None = None) -> LinearizedProgram:
    N, K, T = inst.n_servers, inst.n_vehicles, inst.horizon
    bound = default_big_m(inst)
    big_m = bound if big_m is None else float(big_m)
    if big_m < bound * (1 - 1e-12):
        raise InvalidParameterError(
            f"big-M {big_m!r} is below the largest slot compute delay {bound!r}; relaxation unsound")
    lam = inst.weights
    d = inst.comm_delays
    prog = LinearizedProgram(big_m=big_m)
    prog.comments = [
        "Service placement and migration, linearized integer program",
        f"N={N} K={K} T={T}",
        f"big-M = {_num(big_m)} (K * max cycles / min capacity)",
        "slot 1 migrations reference the fixed initial placement: "
        + " ".join(f"k{k + 1}->n{n + 1}" for k, n in enumerate(inst.initial)),
        "indicator form of the big-M pairs: x_k_n_t = 1 -> y_k_t - sum_j (c_k/F_n) x_j_n_t = 0",
    ]

    for t in range(T):
        for k in range(K):
            for n in range(N):
                prog.binaries.append(x_name(k, n, t))
    for t in range(T):
        for k in range(K):
            for src in range(N):
                for dst in range(N):
                    prog.binaries.append(z_name(k, src, dst, t))
    prog.continuous = [y_name(k, t) for t in range(T) for k in range(K)]

    obj = prog.objective
    for t in range(T):
        for k in range(K):
            for n in range(N):
                if math.isinf(d[t, k, n]):
                    prog.fixed_zero.append(x_name(k, n, t))
                elif lam.comm:
                    obj[x_name(k, n, t)] = lam.comm * float(d[t, k, n])
    if lam.compute:
        for t in range(T):
            for k in range(K):
                obj[y_name(k, t)] = lam.compute
    if lam.migration:
        for t in range(T):
            for k in range(K):
                for src in range(N):
                    for dst in range(N):
                        cost = float(inst.migration[src, dst, k, t])
                        if cost:
                            obj[z_name(k, src, dst, t)] = lam.migration * cost

    add = prog.constraints.append
    for t in range(T):
        for k in range(K):
            add(Constraint(f"assign_k{k + 1}_t{t + 1}", "assign",
                           {x_name(k, n, t): 1.0 for n in range(N)}, "=", 1.0))
    for t in range(T):
        for k in range(K):
            for src in range(N):
                for dst in range(N):
                    z = z_name(k, src, dst, t)
                    tag = f"k{k + 1}_{src + 1}to{dst + 1}_t{t + 1}"
                    if t > 0:
                        add(Constraint(f"zprev_{tag}", "z_le_prev",
                                       {z: 1.0, x_name(k, src, t - 1): -1.0}, "<=", 0.0))
                    add(Constraint(f"zcur_{tag}", "z_le_cur",
                                   {z: 1.0, x_name(k, dst, t): -1.0}, "<=", 0.0))
                    if t > 0:
                        add(Constraint(f"zboth_{tag}", "z_ge_both",
                                       {z: 1.0, x_name(k, src, t - 1): -1.0, x_name(k, dst, t): -1.0},
                                       ">=", -1.0))
                    elif src == inst.initial[k]:
                        add(Constraint(f"zinit_{tag}", "z_ge_init",
                                       {z: 1.0, x_name(k, dst, t): -1.0}, ">=", 0.0))
                    else:
                        prog.fixed_zero.append(z)
    for t in range(T):
        for k in range(K):
            y = y_name(k, t)
            for n in range(N):
                a = float(inst.cycles[k] / inst.capacity[n])
                lo = {y: 1.0}
                hi = {y: 1.0}
                for j in range(K):
                    lo[x_name(j, n, t)] = -a
                    hi[x_name(j, n, t)] = -a
                lo[x_name(k, n, t)] -= big_m
                hi[x_name(k, n, t)] += big_m
                tag = f"k{k + 1}_n{n + 1}_t{t + 1}"
                add(Constraint(f"ylo_{tag}", "bigm_lo", lo, ">=", -big_m))
                add(Constraint(f"yhi_{tag}", "bigm_hi", hi, "<=", big_m))
    return prog


def export_lp(inst: Instance, big_m: float | None = None) -> str:
    return linearize(inst, big_m).to_lp()


# --- linearization consistency ------------------------------------------------------


@dataclass
class LinearizationReport:
    migration_x: float
    migration_z: float
    compute_x: float
    compute_y: float
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def point_from_trajectory(inst: Instance, traj) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-hot x (K, N, T), z (K, N, N, T) and y (K, T) induced by a schedule."""
    N, K, T = inst.n_servers, inst.n_vehicles, inst.horizon
    x = np.zeros((K, N, T))
    for t, a in enumerate(traj):
        x[np.arange(K), list(a), t] = 1.0
    prev = np.zeros((K, N, T))
    prev[np.arange(K), list(inst.initial), 0] = 1.0
    prev[:, :, 1:] = x[:, :, :-1]
    z = prev[:, :, None, :] * x[:, None, :, :]
    load = x.sum(axis=0)  # (N, T)
    y = (x * load[None] * inst.cycles[:, None, None] / inst.capacity[None, :, None]).sum(axis=1)
    return x, z, y


def point_values(inst: Instance, traj) -> dict[str, float]:
    x, z, y = point_from_trajectory(inst, traj)
    K, N, T = x.shape
    vals = {}
    for k, n, t in itertools.product(range(K), range(N), range(T)):
        vals[x_name(k, n, t)] = x[k, n, t]
    for k, src, dst, t in itertools.product(range(K), range(N), range(N), range(T)):
        vals[z_name(k, src, dst, t)] = z[k, src, dst, t]
    for k, t in itertools.product(range(K), range(T)):
        vals[y_name(k, t)] = y[k, t]
    return vals


def validate_linearization(inst: Instance, traj, tol: float = 1e-9) -> LinearizationReport:
    if len(traj) != inst.horizon:
        raise InvalidParameterError("trajectory length does not match the horizon")
    x, z, y = point_from_trajectory(inst, traj)
    original = evaluate_objective(traj, inst)
    m = np.transpose(inst.migration, (2, 0, 1, 3))  # (K, N, N, T)
    report = LinearizationReport(original.migration, float((z * m).sum()),
                                 original.compute, float(y.sum()))

    def close(a, b):
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))

    if not close(report.migration_x, report.migration_z):
        report.mismatches.append(
            f"migration: original {report.migration_x!r} vs linearized {report.migration_z!r}")
    if not close(report.compute_x, report.compute_y):
        report.mismatches.append(
            f"compute: original {report.compute_x!r} vs linearized {report.compute_y!r}")

    K, N, T = x.shape
    for k, src, dst, t in itertools.product(range(K), range(N), range(N), range(T)):
        zv = z[k, src, dst, t]
        prev = x[k, src, t - 1] if t else float(inst.initial[k] == src)
        if t and zv > prev:
            report.mismatches.append(f"z<=x(t-1) violated for k={k} {src}->{dst} t={t}")
        if zv > x[k, dst, t]:
            report.mismatches.append(f"z<=x(t) violated for k={k} {src}->{dst} t={t}")
        if zv < prev + x[k, dst, t] - 1:
            report.mismatches.append(f"z>=x+x-1 violated for k={k} {src}->{dst} t={t}")

    prog = linearize(inst)
    values = point_values(inst, traj)
    for name in prog.violated(values, tol):
        report.mismatches.append(f"exported constraint {name} violated")
    lin = prog.objective_value(values)
    if not close(lin, original.total):
        report.mismatches.append(f"objective: original {original.total!r} vs linearized {lin!r}")
    return report
