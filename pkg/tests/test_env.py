import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecmig.env import (
    INFEASIBLE_REWARD,
    InvalidStateError,
    MigrationEnv,
    Normalizers,
    Snapshot,
    agent_cost,
    decode_action,
    encode_action,
    feasible,
    from_assignment,
    repair,
    reward,
    to_assignment,
)
from mecmig.model import Instance, ObjectiveWeights, evaluate_objective
from mecmig.scenario import ScenarioConfig

CFG = ScenarioConfig()


@pytest.fixture
def env():
    e = MigrationEnv(CFG, horizon=5)
    e.reset(42)
    return e


def test_action_codec_round_trip():
    for a in range(16):
        assert encode_action(decode_action(a, 4)) == a
    assert list(decode_action(0b0101, 4)) == [1, 0, 1, 0]


def test_feasibility_cases():
    assert feasible([0b0011, 0b0100, 0b1000], 4)
    assert not feasible([0b0011, 0b0110, 0b1000], 4)  # vehicle 1 twice
    assert not feasible([0b0011, 0b0100, 0b0000], 4)  # vehicle 3 orphaned


@given(st.lists(st.integers(0, 15), min_size=3, max_size=3))
def test_feasible_matches_bit_counting(joint):
    counts = [sum((a >> k) & 1 for a in joint) for k in range(4)]
    assert feasible(joint, 4) == all(c == 1 for c in counts)


def test_assignment_round_trip():
    a = (2, 0, 0, 1)
    assert to_assignment(from_assignment(a, 3), 4) == a


def test_repair_identity_on_feasible():
    q = np.random.default_rng(0).normal(size=(3, 16))
    assert repair([0b0011, 0b0100, 0b1000], q) == [0b0011, 0b0100, 0b1000]


def test_repair_tie_goes_to_lowest_index():
    q = np.zeros((3, 16))
    # vehicle 0 claimed by agents 0 and 2 with equal Q
    out = repair([0b0001, 0b0110, 0b1001], q)
    assert out == [0b0001, 0b0110, 0b1000]


def test_repair_follows_q_values():
    q = np.zeros((3, 16))
    q[2, 0b1001] = 5.0
    assert repair([0b0001, 0b0110, 0b1001], q) == [0b0000, 0b0110, 0b1001]
    # orphan vehicle 3 goes to whichever agent values the extended action most
    q = np.zeros((3, 16))
    q[1, 0b1110] = 1.0
    assert repair([0b0001, 0b0110, 0b0000], q) == [0b0001, 0b1110, 0b0000]


@settings(max_examples=200)
@given(joint=st.lists(st.integers(0, 15), min_size=3, max_size=3), seed=st.integers(0, 2**32 - 1))
def test_repair_feasible_and_idempotent(joint, seed):
    q = np.random.default_rng(seed).normal(size=(3, 16))
    fixed = repair(joint, q)
    assert feasible(fixed, 4)
    assert repair(fixed, q) == fixed


def test_reset_deterministic_and_bounded():
    e = MigrationEnv(CFG, horizon=5)
    a = e.reset(9)
    b = e.reset(9)
    assert np.array_equal(a, b)
    assert a.shape == (3, 36)
    assert np.all(np.abs(a) <= 1.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_features_bounded_over_episode(seed):
    e = MigrationEnv(CFG, horizon=10)
    s = e.reset(seed)
    rng = np.random.default_rng(seed)
    while not e.done:
        assert np.all(np.abs(s) <= 1.0)
        s, _, _ = e.step([int(v) for v in rng.integers(0, 16, 3)])


def test_exact_step_count(env):
    for _ in range(5):
        env.step([0b1111, 0, 0])
    assert env.done
    with pytest.raises(InvalidStateError):
        env.step([0b1111, 0, 0])


def test_infeasible_penalizes_everyone_and_freezes(env):
    before = env.assignment
    rewards, _, rec = env.step([0b1111, 0b1111, 0])
    assert list(rewards) == [INFEASIBLE_REWARD] * 3
    assert not rec.feasible
    assert env.assignment == before


def test_empty_agent_gets_zero(env):
    rewards, _, _ = env.step([0b1111, 0, 0])
    # agents 1 and 2 host nothing and had nothing to migrate in
    assert rewards[1] == 0.0 and rewards[2] == 0.0
    assert -1.0 < rewards[0] < 0.0


def test_single_vehicle_reward_matches_objective():
    cfg = ScenarioConfig(n_vehicles=1)
    e = MigrationEnv(cfg, horizon=1)
    e.reset(5)
    inst = e.instance
    target = 1 if inst.initial[0] != 1 else 2
    snap = e.snapshot()
    r = reward(target, [int(n == target) for n in range(3)], snap)
    one = evaluate_objective([(target,)], inst)
    z = e.normalizers
    w = inst.weights
    assert r == pytest.approx(-(w.compute * one.compute / z.compute + w.comm * one.comm / z.comm
                                + w.migration * one.migration / z.migration), rel=1e-12)


def test_slot_record_matches_objective(env):
    a = (0, 1, 2, 2)
    _, _, rec = env.step(from_assignment(a, 3))
    inst = env.instance
    one = Instance(inst.servers, inst.requests, inst.gains[:1], inst.migration[..., :1], inst.initial,
                   inst.weights, inst.radio)
    val = evaluate_objective([a], one)
    assert (rec.compute, rec.comm, rec.migration) == pytest.approx((val.compute, val.comm, val.migration))


def test_weighted_agent_costs_sum_to_slot_objective(env):
    inst = env.instance
    a = (2, 2, 0, 1)
    costs = [agent_cost(n, a, inst.initial, inst, 0) for n in range(3)]
    one = Instance(inst.servers, inst.requests, inst.gains[:1], inst.migration[..., :1], inst.initial,
                   inst.weights, inst.radio)
    w = inst.weights
    total = sum(w.compute * c.compute + w.comm * c.comm + w.migration * c.migration for c in costs)
    assert total == pytest.approx(evaluate_objective([a], one).total, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), joint=st.lists(st.integers(0, 15), min_size=3, max_size=3))
def test_reward_range(seed, joint):
    e = MigrationEnv(CFG, horizon=1)
    e.reset(seed)
    snap = e.snapshot()
    for n in range(3):
        r = reward(n, joint, snap)
        assert -1.0 <= r <= 0.0
        assert (r == -1.0) == (not feasible(joint, 4))


def test_header_publishes_normalizers(env):
    h = env.header()
    z = Normalizers.for_config(CFG)
    assert (h["norm_compute"], h["norm_comm"], h["norm_migration"]) == (z.compute, z.comm, z.migration)
    assert h["seed"] == 42


def test_reward_clipped_above_penalty():
    # a pathological weighting can't push a feasible reward to the infeasible value
    cfg = CFG.replace(weights=(0.0, 1.0, 0.0))
    e = MigrationEnv(cfg, horizon=1)
    e.reset(1)
    snap = e.snapshot()
    worst = min(reward(n, from_assignment((n,) * 4, 3), snap) for n in range(3))
    assert worst > -1.0
    assert isinstance(snap, Snapshot) and isinstance(cfg.objective_weights, ObjectiveWeights)
