import json

import numpy as np
import pytest

from mecmig.dql import (
    Batch,
    CheckpointError,
    CheckpointVersionError,
    DqlConfig,
    ReplayBuffer,
    epsilon,
    infer,
    load_checkpoint,
    make_agents,
    save_checkpoint,
    select_action,
    td_targets,
    train,
)
from mecmig.env import MigrationEnv
from mecmig.neural import QNetwork, forward, init_network
from mecmig.scenario import ScenarioConfig, realize
from mecmig.solver import dp_solve

CFG = DqlConfig(episodes=100)
TINY = ScenarioConfig(n_servers=2, n_vehicles=2, batch_size=16, replay_capacity=200, target_interval=20,
                      hidden=(16, 16))


def test_epsilon_schedule():
    assert epsilon(0, CFG) == 1.0
    assert epsilon(80, CFG) == pytest.approx(0.02)
    assert epsilon(99, CFG) == pytest.approx(0.02)
    assert epsilon(40, CFG) == pytest.approx(0.51)


def _net_with_output(values):
    k = len(values)
    return QNetwork((1, k), [np.zeros((1, k))], [np.asarray(values, dtype=float)])


def test_greedy_selection_and_ties():
    rng = np.random.default_rng(0)
    assert select_action(_net_with_output([0.0, 3.0, 1.0, 3.0]), np.zeros(1), 0.0, rng) == 1
    net = init_network((6, 8, 4), 1)
    x = np.ones(6)
    assert select_action(net, x, 0.0, rng) == int(np.argmax(forward(net, x)))


def test_uniform_exploration():
    rng = np.random.default_rng(123)
    net = _net_with_output([0.0, 0.0, 0.0, 9.0])
    draws = np.array([select_action(net, np.zeros(1), 1.0, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.all(np.abs(freq - 0.25) < 0.02 * 0.25 * 4)  # within 2 percentage points


def test_replay_ring_and_uniform_sampling():
    buf = ReplayBuffer(5, 1)
    for i in range(12):
        buf.push([i], i % 4, -0.1, [i + 1], False)
    assert len(buf) == 5
    assert sorted(buf.states[:, 0]) == [7, 8, 9, 10, 11]
    sample = buf.sample(100_000, np.random.default_rng(0))
    freq = np.bincount(sample.states[:, 0].astype(int) - 7, minlength=5) / 100_000
    assert np.all(np.abs(freq - 0.2) < 0.01)


def _batch(rewards, dones, next_states):
    n = len(rewards)
    return Batch(np.zeros((n, 1)), np.zeros(n, dtype=int), np.asarray(rewards, float),
                 np.asarray(next_states, float).reshape(n, 1), np.asarray(dones, bool))


def test_targets_degenerate_cases():
    b = _batch([-0.5, -1.0], [False, False], [1.0, 2.0])
    main, tgt = init_network((1, 4, 2), 0), init_network((1, 4, 2), 1)
    assert np.array_equal(td_targets(b, main, tgt, 0.0), b.rewards)
    zero = QNetwork((1, 2), [np.zeros((1, 2))], [np.zeros(2)])
    assert np.array_equal(td_targets(b, main, zero, 0.99), b.rewards)


def test_targets_hand_computed():
    # main prefers action 1 for s' = 1, the target net scores that action
    main = QNetwork((1, 2), [np.array([[0.0, 1.0]])], [np.array([0.5, 0.0])])
    tgt = QNetwork((1, 2), [np.array([[2.0, -3.0]])], [np.array([0.0, 1.0])])
    b = _batch([-0.25, -0.25, -0.5], [False, False, True], [1.0, 0.0, 1.0])
    # s'=1: main [0.5, 1] -> a*=1, target [2, -2] -> -2;  s'=0: main [0.5, 0] -> a*=0, target 0
    assert td_targets(b, main, tgt, 0.5) == pytest.approx([-0.25 - 1.0, -0.25, -0.5])


def test_double_reduces_to_classic_when_nets_equal():
    net = init_network((3, 8, 4), 5)
    rng = np.random.default_rng(0)
    b = Batch(rng.normal(size=(6, 3)), rng.integers(0, 4, 6), rng.uniform(-1, 0, 6),
              rng.normal(size=(6, 3)), np.zeros(6, bool))
    classic = b.rewards + 0.9 * forward(net, b.next_states).max(axis=1)
    assert np.allclose(td_targets(b, net, net, 0.9), classic, rtol=1e-14)


@pytest.fixture(scope="module")
def tiny_run():
    dc = DqlConfig.from_scenario(TINY, episodes=12, horizon=5)
    return dc, train(dc, MigrationEnv(TINY, horizon=5))


def test_training_log_and_determinism(tiny_run):
    dc, res = tiny_run
    assert len(res.reward_log) == 12 * 2
    assert all(-1.0 <= r["mean_reward"] <= 0.0 for r in res.reward_log)
    again = train(dc, MigrationEnv(TINY, horizon=5))
    assert again.reward_log == res.reward_log
    for a, b in zip(res.nets, again.nets):
        assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    for agent in res.agents:
        assert len(agent.buffer) <= dc.replay_capacity
        assert agent.updates > 0


def test_inference_feasible_and_bounded(tiny_run):
    _, res = tiny_run
    env = MigrationEnv(TINY, horizon=TINY.eval_horizon)
    seeds = [11, 12, 13]
    out = infer(res.nets, env, seeds)
    again = infer(res.nets, env, seeds)
    assert [o.total for o in out.objectives] == [o.total for o in again.objectives]
    for s, o in zip(seeds, out.objectives):
        assert o.total >= dp_solve(realize(TINY, s, TINY.eval_horizon).instance).value * (1 - 1e-12)


def test_inference_rejects_wrong_architecture():
    env = MigrationEnv(TINY, horizon=3)
    with pytest.raises(ValueError):
        infer([init_network((5, 4), 0)] * 2, env, [1])


def test_checkpoint_round_trip(tmp_path, tiny_run):
    _, res = tiny_run
    path = tmp_path / "ck.json"
    save_checkpoint(res.agents, path)
    loaded = load_checkpoint(path)
    x = np.random.default_rng(0).uniform(-1, 1, size=(3, 18))
    for a, b in zip(res.agents, loaded):
        assert np.array_equal(forward(a.main, x), forward(b.main, x))
        assert a.steps == b.steps


def test_checkpoint_errors(tmp_path, tiny_run):
    _, res = tiny_run
    path = tmp_path / "ck.json"
    save_checkpoint(res.agents, path)
    text = path.read_text()
    (tmp_path / "cut.json").write_text(text[: len(text) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "cut.json")
    doc = json.loads(text)
    doc["version"] = 99
    (tmp_path / "v.json").write_text(json.dumps(doc))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(tmp_path / "v.json")


def test_agents_have_independent_streams():
    agents = make_agents(DqlConfig(hidden=(8,)), 3, 9, 2)
    assert not np.array_equal(agents[0].main.weights[0], agents[1].main.weights[0])
    draws = [a.explore_rng.random() for a in agents]
    assert len(set(draws)) == 3
