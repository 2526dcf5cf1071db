"""Multi-agent double-DQN training and greedy inference.

Every MEC server owns a main and a target Q-network, an Adam state and a
replay buffer.  All agents act on the same slot before the environment
advances, so the controller sees one joint action per slot.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import MigrationEnv, feasible, repair
from .model import ObjectiveValue, evaluate_objective
from .neural import (
    AdamState,
    ArchitectureError,
    QNetwork,
    adam_step,
    backward,
    clone,
    copy_params,
    forward,
    init_network,
    mse_loss,
)
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "mecmig-ddqn-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class DqlConfig:
    episodes: int = 3000
    horizon: int = 100
    batch_size: int = 1024
    gamma: float = 0.99
    target_interval: int = 1000
    eps_start: float = 1.0
    eps_end: float = 0.02
    eps_decay_fraction: float = 0.8
    learning_rate: float = 3e-4
    replay_capacity: int = 100_000
    hidden: tuple[int, ...] = (256, 256)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.batch_size > self.replay_capacity:
            raise ValueError("mini-batch cannot exceed replay capacity")
        if self.episodes < 1 or self.horizon < 1:
            raise ValueError("need at least one episode of at least one slot")

    @classmethod
    def from_scenario(cls, cfg: ScenarioConfig, **overrides) -> "DqlConfig":
        base = dict(
            episodes=cfg.episodes, horizon=cfg.train_horizon, batch_size=cfg.batch_size,
            gamma=cfg.discount, target_interval=cfg.target_interval, eps_start=cfg.eps_start,
            eps_end=cfg.eps_end, eps_decay_fraction=cfg.eps_decay_fraction,
            learning_rate=cfg.learning_rate, replay_capacity=cfg.replay_capacity,
            hidden=tuple(cfg.hidden), seed=cfg.seed,
        )
        base.update(overrides)
        return cls(**base)


def epsilon(episode: int, cfg: DqlConfig) -> float:
    """Linear decay from ``eps_start`` to ``eps_end`` over the first part of training."""
    span = cfg.eps_decay_fraction * cfg.episodes
    if span <= 0:
        return cfg.eps_end
    frac = min(episode / span, 1.0)
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def greedy(q: np.ndarray) -> int:
    return int(np.argmax(q))  # first maximum wins ties


def select_action(net: QNetwork, state: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return int(rng.integers(net.sizes[-1]))
    return greedy(forward(net, state))


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action: int, reward: float, next_state, done: bool) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> "Batch":
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


def td_targets(batch: Batch, main: QNetwork, target: QNetwork, gamma: float) -> np.ndarray:
    """Double-DQN targets: the main net picks the next action, the target net scores it."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    best = np.argmax(forward(main, batch.next_states), axis=1)
    q_next = forward(target, batch.next_states)[np.arange(len(batch)), best]
    return batch.rewards + gamma * np.where(batch.dones, 0.0, q_next)


def train_step(main: QNetwork, target: QNetwork, adam: AdamState, batch: Batch, gamma: float) -> float:
    y = td_targets(batch, main, target, gamma)
    q, cache = forward(main, batch.states, cache=True)
    rows = np.arange(len(batch))
    loss, g_pred = mse_loss(q[rows, batch.actions], y)
    upstream = np.zeros_like(q)
    upstream[rows, batch.actions] = g_pred
    adam_step(main, backward(main, cache, upstream), adam)
    return loss


@dataclass(eq=False)
class Agent:
    main: QNetwork
    target: QNetwork
    adam: AdamState
    buffer: ReplayBuffer | None = None
    explore_rng: np.random.Generator | None = None
    sample_rng: np.random.Generator | None = None
    steps: int = 0
    updates: int = 0


def make_agents(cfg: DqlConfig, n_agents: int, state_dim: int, n_actions: int) -> list[Agent]:
    agents = []
    for seq in np.random.SeedSequence(cfg.seed).spawn(n_agents):
        init_seq, explore_seq, sample_seq = seq.spawn(3)
        main = init_network((state_dim, *cfg.hidden, n_actions), np.random.default_rng(init_seq))
        agents.append(Agent(main, clone(main), AdamState.for_network(main, cfg.learning_rate),
                            ReplayBuffer(cfg.replay_capacity, state_dim),
                            np.random.default_rng(explore_seq), np.random.default_rng(sample_seq)))
    return agents


def episode_seed(master: int, episode: int, stream: int = 0) -> int:
    """Per-episode environment seed; ``stream`` separates training from evaluation."""
    return int(np.random.SeedSequence([master, stream, episode]).generate_state(1)[0])


@dataclass
class TrainResult:
    agents: list[Agent]
    reward_log: list[dict] = field(default_factory=list)

    @property
    def nets(self) -> list[QNetwork]:
        return [a.main for a in self.agents]

    def mean_rewards(self, agent: int) -> np.ndarray:
        return np.array([r["mean_reward"] for r in self.reward_log if r["agent"] == agent])


def train(cfg: DqlConfig, env: MigrationEnv, progress: bool = False) -> TrainResult:
    if env.horizon != cfg.horizon:
        env.horizon = cfg.horizon
    agents = make_agents(cfg, env.n_agents, env.state_dim, env.n_actions)
    result = TrainResult(agents)
    for ep in range(cfg.episodes):
        states = env.reset(episode_seed(cfg.seed, ep), episode_index=ep)
        eps = epsilon(ep, cfg)
        totals = np.zeros(env.n_agents)
        while not env.done:
            joint = [select_action(a.main, s, eps, a.explore_rng) for a, s in zip(agents, states)]
            rewards, next_states, _ = env.step(joint)
            totals += rewards
            for n, agent in enumerate(agents):
                agent.buffer.push(states[n], joint[n], rewards[n], next_states[n], env.done)
                agent.steps += 1
                if len(agent.buffer) >= cfg.batch_size:
                    batch = agent.buffer.sample(cfg.batch_size, agent.sample_rng)
                    train_step(agent.main, agent.target, agent.adam, batch, cfg.gamma)
                    agent.updates += 1
                if agent.steps % cfg.target_interval == 0:
                    copy_params(agent.main, agent.target)
            states = next_states
        for n in range(env.n_agents):
            result.reward_log.append({"episode": ep, "agent": n,
                                      "mean_reward": float(totals[n] / env.horizon), "epsilon": eps})
        if progress and (ep + 1) % max(1, cfg.episodes // 20) == 0:
            log.info("episode %d/%d eps=%.3f mean rewards %s", ep + 1, cfg.episodes, eps,
                     np.round(totals / env.horizon, 4))
    return result


@dataclass
class InferenceResult:
    objectives: list[ObjectiveValue]
    seeds: list[int]
    conflicts: int  # slots whose raw greedy joint action needed repair
    slots: int

    def mean(self) -> ObjectiveValue:
        return ObjectiveValue(*np.mean(np.array(self.objectives), axis=0))

    def std(self) -> ObjectiveValue:
        return ObjectiveValue(*np.std(np.array(self.objectives), axis=0))


def greedy_joint_action(nets: Sequence[QNetwork], states: np.ndarray) -> tuple[list[int], list[int]]:
    """Raw greedy actions and their repaired, feasible counterpart."""
    q = np.array([forward(net, s) for net, s in zip(nets, states)])
    raw = [greedy(row) for row in q]
    return raw, repair(raw, q)


def infer(nets: Sequence[QNetwork], env: MigrationEnv, seeds: Sequence[int]) -> InferenceResult:
    if len(nets) != env.n_agents:
        raise ArchitectureError(f"{len(nets)} networks for {env.n_agents} agents")
    for net in nets:
        if net.sizes[0] != env.state_dim or net.sizes[-1] != env.n_actions:
            raise ArchitectureError(f"network {net.sizes} does not fit state {env.state_dim} / "
                                    f"actions {env.n_actions}")
    objectives, conflicts, slots = [], 0, 0
    for i, seed in enumerate(seeds):
        states = env.reset(seed, episode_index=i)
        while not env.done:
            raw, joint = greedy_joint_action(nets, states)
            conflicts += not feasible(raw, env.n_vehicles)
            slots += 1
            _, states, _ = env.step(joint)
        objectives.append(evaluate_objective(env.placements, env.instance))
    return InferenceResult(objectives, list(seeds), conflicts, slots)


# --- checkpoints ----------------------------------------------------------------------


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def _net_to_dict(net: QNetwork) -> dict:
    return {"weights": [w.tolist() for w in net.weights], "biases": [b.tolist() for b in net.biases]}


def _net_from_dict(sizes, d: dict) -> QNetwork:
    weights = [np.array(w, dtype=np.float64) for w in d["weights"]]
    biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
            raise CheckpointError(f"layer {i} has inconsistent shapes")
    return QNetwork(tuple(sizes), weights, biases)


def save_checkpoint(agents: Sequence[Agent], path: str | Path) -> None:
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "agents": []}
    for a in agents:
        doc["agents"].append({
            "sizes": list(a.main.sizes),
            "main": _net_to_dict(a.main),
            "target": _net_to_dict(a.target),
            "adam": {"lr": a.adam.lr, "beta1": a.adam.beta1, "beta2": a.adam.beta2, "eps": a.adam.eps,
                     "step": a.adam.step, "m": [m.tolist() for m in a.adam.m],
                     "v": [v.tolist() for v in a.adam.v]},
            "steps": a.steps,
        })
    Path(path).write_text(json.dumps(doc, separators=(",", ":")))


def load_checkpoint(path: str | Path) -> list[Agent]:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}")
    agents = []
    try:
        for entry in doc["agents"]:
            sizes = entry["sizes"]
            main = _net_from_dict(sizes, entry["main"])
            target = _net_from_dict(sizes, entry["target"])
            ad = entry["adam"]
            adam = AdamState(ad["lr"], ad["beta1"], ad["beta2"], ad["eps"], ad["step"],
                             [np.array(m, dtype=np.float64) for m in ad["m"]],
                             [np.array(v, dtype=np.float64) for v in ad["v"]])
            agents.append(Agent(main, target, adam, steps=entry["steps"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    return agents
