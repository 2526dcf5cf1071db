"""Multi-agent placement environment: one agent per MEC server.

Each agent emits a K-bit action (bit ``k`` set means "host vehicle k").  The
controller accepts a joint action only if every vehicle is claimed by exactly
one agent; otherwise every agent receives the -1 penalty and the previous
placement stays in force.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .mobility import distance, path_loss_db
from .model import Assignment, Instance, count_services
from .scenario import Episode, ScenarioConfig, realize

FEATURES_PER_VEHICLE = 9
INFEASIBLE_REWARD = -1.0
# feasible rewards stay strictly above the infeasibility penalty
REWARD_FLOOR = -(1.0 - 1e-6)


class InvalidStateError(RuntimeError):
    pass


def decode_action(action: int, n_vehicles: int) -> np.ndarray:
    """Bit ``k`` of ``action`` is the placement decision for vehicle ``k``."""
    return (int(action) >> np.arange(n_vehicles)) & 1


def encode_action(bits: Sequence[int]) -> int:
    return sum(int(b) << k for k, b in enumerate(bits))


def claims(joint_action: Sequence[int], n_vehicles: int) -> np.ndarray:
    """Claim matrix of shape (N, K)."""
    return np.array([decode_action(a, n_vehicles) for a in joint_action]).reshape(len(joint_action), n_vehicles)


def feasible(joint_action: Sequence[int], n_vehicles: int) -> bool:
    return bool(np.all(claims(joint_action, n_vehicles).sum(axis=0) == 1))


def to_assignment(joint_action: Sequence[int], n_vehicles: int) -> Assignment:
    c = claims(joint_action, n_vehicles)
    if not np.all(c.sum(axis=0) == 1):
        raise ValueError("joint action is infeasible")
    return tuple(int(n) for n in c.argmax(axis=0))


def from_assignment(a: Assignment, n_servers: int) -> list[int]:
    return [encode_action([int(s == n) for s in a]) for n in range(n_servers)]


def repair(joint_action: Sequence[int], q_rows: np.ndarray) -> list[int]:
    """Turn a conflicting joint action into a feasible one using Q-values.

    Each vehicle claimed by zero or several agents goes to the candidate
    (claimers, or every agent for orphans) whose Q-value for its current
    action with that vehicle added is highest; ties go to the lowest index.
    """
    q_rows = np.asarray(q_rows)
    n_agents, n_actions = q_rows.shape
    n_vehicles = n_actions.bit_length() - 1
    actions = [int(a) for a in joint_action]
    for k in range(n_vehicles):
        bit = 1 << k
        claimers = [n for n in range(n_agents) if actions[n] & bit]
        if len(claimers) == 1:
            continue
        candidates = claimers or list(range(n_agents))
        winner = max(candidates, key=lambda n: (q_rows[n, actions[n] | bit], -n))
        for n in range(n_agents):
            actions[n] = actions[n] | bit if n == winner else actions[n] & ~bit
    return actions


@dataclass(frozen=True)
class Normalizers:
    """Divisors bringing each agent's slot cost terms into [0, 1]."""

    compute: float
    comm: float
    migration: float

    @classmethod
    def for_config(cls, cfg: ScenarioConfig) -> "Normalizers":
        K = cfg.n_vehicles
        max_bits = cfg.request_kbits[1] * 1000.0
        max_cycles = cfg.cycles_per_bit * max_bits
        servers = cfg.servers()
        min_cap = min(s.compute_capacity for s in servers)
        bw = min(s.bandwidth for s in servers)
        floor_snr = max(s.transmit_power for s in servers) * 10 ** (-path_loss_db(max_distance(cfg)) / 10) \
            / cfg.radio.noise_power(bw)
        return cls(
            compute=K * K * max_cycles / min_cap,
            comm=K * max_bits / (bw * math.log2(1.0 + floor_snr)),
            migration=K * max(cfg.migration_cost_range[1], 1e-12),
        )


def max_distance(cfg: ScenarioConfig) -> float:
    corners = [(0.0, 0.0), (0.0, cfg.highway_width), (cfg.highway_length, 0.0),
               (cfg.highway_length, cfg.highway_width)]
    return max(distance(c, s.position) for c in corners for s in cfg.servers())


class AgentCost(NamedTuple):
    compute: float
    comm: float
    migration: float


def agent_cost(n: int, assignment: Assignment, prev: Assignment, inst: Instance, t: int) -> AgentCost:
    """Un-normalized compute, comm and migration terms for the services hosted on ``n``."""
    load = count_services(assignment, n)
    compute = comm = migration = 0.0
    for k, s in enumerate(assignment):
        if s != n:
            continue
        compute += inst.cycles[k] * load / inst.capacity[n]
        comm += inst.comm_delays[t, k, n]
        if prev[k] != n:
            migration += inst.migration[prev[k], n, k, t]
    return AgentCost(float(compute), float(comm), float(migration))


class Snapshot(NamedTuple):
    instance: Instance
    t: int
    prev: Assignment
    normalizers: Normalizers


def reward(n: int, joint_action: Sequence[int], snap: Snapshot) -> float:
    K = snap.instance.n_vehicles
    if not feasible(joint_action, K):
        return INFEASIBLE_REWARD
    cost = agent_cost(n, to_assignment(joint_action, K), snap.prev, snap.instance, snap.t)
    w, z = snap.instance.weights, snap.normalizers
    terms = [(w.compute, cost.compute / z.compute), (w.comm, cost.comm / z.comm),
             (w.migration, cost.migration / z.migration)]
    value = sum(lam * v for lam, v in terms if lam)
    return max(-value, REWARD_FLOOR)


@dataclass
class SlotRecord:
    episode: int
    t: int
    feasible: bool
    rewards: tuple[float, ...]
    # costs of the placement actually in force during the slot
    compute: float
    comm: float
    migration: float

    def row(self) -> dict:
        out = {"episode": self.episode, "t": self.t, "feasible": int(self.feasible)}
        out.update({f"reward_{n}": r for n, r in enumerate(self.rewards)})
        out.update(compute=self.compute, comm=self.comm, migration=self.migration)
        return out


@dataclass
class MigrationEnv:
    cfg: ScenarioConfig
    horizon: int | None = None
    normalizers: Normalizers = field(init=False)

    def __post_init__(self):
        self.horizon = self.cfg.train_horizon if self.horizon is None else self.horizon
        self.normalizers = Normalizers.for_config(self.cfg)
        self._dmax = max_distance(self.cfg)
        self._vmax = self.cfg.highway.speed_range[1]
        power = max(s.transmit_power for s in self.cfg.servers())
        # dB range of gains: fading upside near the closest point, deep fades at the farthest
        self._gain_hi = 10 * math.log10(power) - path_loss_db(self.cfg.server_offset) + 10.0
        self._gain_lo = 10 * math.log10(power) - path_loss_db(self._dmax) - 20.0
        self.episode: Episode | None = None
        self.episode_index = -1
        self.t = 0
        self.assignment: Assignment = ()
        self.placements: list[Assignment] = []

    @property
    def n_agents(self) -> int:
        return self.cfg.n_servers

    @property
    def n_vehicles(self) -> int:
        return self.cfg.n_vehicles

    @property
    def state_dim(self) -> int:
        return FEATURES_PER_VEHICLE * self.n_vehicles

    @property
    def n_actions(self) -> int:
        return 2**self.n_vehicles

    @property
    def instance(self) -> Instance:
        return self.episode.instance

    @property
    def done(self) -> bool:
        return self.episode is None or self.t >= self.horizon

    def header(self) -> dict:
        return {"seed": self.episode.seed if self.episode else None, "horizon": self.horizon,
                "norm_compute": self.normalizers.compute, "norm_comm": self.normalizers.comm,
                "norm_migration": self.normalizers.migration}

    def reset(self, seed: int, episode_index: int | None = None) -> np.ndarray:
        self.episode = realize(self.cfg, seed, self.horizon)
        self.episode_index = self.episode_index + 1 if episode_index is None else episode_index
        self.t = 0
        self.assignment = tuple(self.instance.initial)
        self.placements = []
        return self.observe()

    def observe(self) -> np.ndarray:
        """Per-agent state vectors, shape (N, 9K)."""
        inst = self.instance
        fleet = self.episode.trace[self.t]
        cfg = self.cfg
        max_bits = cfg.request_kbits[1] * 1000.0
        shared = np.array([
            [v.position[0] / cfg.highway_length, v.position[1] / cfg.highway_width,
             v.speed / self._vmax, float(v.direction)]
            for v in fleet
        ])
        size = inst.sizes / max_bits
        cyc = inst.cycles / (cfg.cycles_per_bit * max_bits)
        with np.errstate(divide="ignore"):
            gain_db = 10 * np.log10(inst.gains[self.t])  # (K, N)
        span = self._gain_hi - self._gain_lo
        gain = np.clip(2 * (gain_db - self._gain_lo) / span - 1, -1.0, 1.0)
        states = np.empty((self.n_agents, self.n_vehicles, FEATURES_PER_VEHICLE))
        for n, server in enumerate(inst.servers):
            dist = np.array([distance(v.position, server.position) for v in fleet]) / self._dmax
            states[n, :, :4] = shared
            states[n, :, 4] = np.minimum(dist, 1.0)
            states[n, :, 5] = gain[:, n]
            states[n, :, 6] = size
            states[n, :, 7] = cyc
            states[n, :, 8] = [float(s == n) for s in self.assignment]
        return states.reshape(self.n_agents, -1)

    def snapshot(self) -> Snapshot:
        return Snapshot(self.instance, self.t, self.assignment, self.normalizers)

    def step(self, joint_action: Sequence[int]) -> tuple[np.ndarray, np.ndarray, SlotRecord]:
        """Apply one joint action; terminal next-states are all zeros."""
        if self.done:
            raise InvalidStateError("episode is over; call reset()")
        if len(joint_action) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {len(joint_action)}")
        snap = self.snapshot()
        ok = feasible(joint_action, self.n_vehicles)
        rewards = np.array([reward(n, joint_action, snap) for n in range(self.n_agents)])
        placed = to_assignment(joint_action, self.n_vehicles) if ok else self.assignment
        costs = [agent_cost(n, placed, self.assignment, self.instance, self.t) for n in range(self.n_agents)]
        record = SlotRecord(self.episode_index, self.t, ok, tuple(float(r) for r in rewards),
                            sum(c.compute for c in costs), sum(c.comm for c in costs),
                            sum(c.migration for c in costs))
        self.assignment = placed
        self.placements.append(placed)
        self.t += 1
        nxt = np.zeros((self.n_agents, self.state_dim)) if self.done else self.observe()
        return rewards, nxt, record
