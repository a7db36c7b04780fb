import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from vinedqn.environment import EnvConfig, VineEnv
from vinedqn.qlearn import (
    GridSpec,
    Hyperparameters,
    LatticePlanner,
    MemoryNotReady,
    QNetwork,
    ReplayMemory,
    Transition,
    epsilon_at,
    evaluate,
    heatmap,
    select_action,
    td_target,
    train,
    train_step,
)
from vinedqn.qlearn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from vinedqn.qlearn.network import SGD, Adam
from vinedqn.qlearn.replay import Batch
from vinedqn.qlearn.training import DQNAgent, observation_scale


def reference_forward(net, x):
    """Plain loop re-implementation of the forward pass."""
    out = []
    for row in np.atleast_2d(x):
        a = list(row)
        for w, b, act in zip(net.weights, net.biases, net.activations):
            z = [sum(a[i] * w[i, j] for i in range(len(a))) + (b[j] if b is not None else 0.0)
                 for j in range(w.shape[1])]
            a = [max(v, 0.0) if act == "relu" else math.tanh(v) if act == "tanh" else v for v in z]
        out.append(a)
    return np.array(out)


def batch_of(transitions):
    return Batch(
        np.array([t.state for t in transitions], dtype=float),
        np.array([t.action for t in transitions]),
        np.array([t.reward for t in transitions], dtype=float),
        np.array([t.next_state for t in transitions], dtype=float),
        np.array([t.done for t in transitions]),
    )


# -- network -----------------------------------------------------------------

def test_zero_network_outputs_zero():
    net = QNetwork((9, 64, 64, 6))
    assert np.array_equal(net.forward(np.random.default_rng(0).normal(size=(5, 9))), np.zeros((5, 6)))


def test_identity_linear_layer():
    net = QNetwork((3, 2), ["linear"], bias=False)
    net.weights[0][...] = [[1, 0], [0, 0], [0, 1]]
    np.testing.assert_array_equal(net.forward(np.array([4.0, 5.0, 6.0])), [4.0, 6.0])


@pytest.mark.parametrize("acts", [None, ["tanh", "relu", "linear"]])
def test_forward_matches_reference(acts):
    rng = np.random.default_rng(3)
    net = QNetwork((9, 7, 5, 6), acts, rng=rng)
    for b in net.biases:
        b[...] = rng.normal(size=b.shape)
    x = rng.normal(size=(4, 9))
    np.testing.assert_allclose(net.forward(x), reference_forward(net, x), atol=1e-12)
    np.testing.assert_array_equal(net.forward(x[0]), net.forward(x)[0])


def test_forward_rejects_non_finite():
    net = QNetwork((2, 2), rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.array([np.nan, 0.0]))


def test_parameters_are_views_of_flat_buffer():
    net = QNetwork((9, 4, 6), rng=np.random.default_rng(0))
    params = net.parameters()
    assert sum(p.size for p in params) == net.flat.size
    params[0][0, 0] = 123.0
    assert net.weights[0][0, 0] == 123.0
    other = net.copy()
    other.flat[:] = 0.0
    assert net.weights[0][0, 0] == 123.0


def loss_fn(net, batch, targets):
    q = net.forward(batch.states)
    err = q[np.arange(len(targets)), batch.actions] - targets
    return 0.5 * np.mean(err * err)


@pytest.mark.parametrize("acts", [None, ["tanh", "tanh", "linear"]])
def test_gradient_matches_finite_differences(acts):
    rng = np.random.default_rng(7)
    net = QNetwork((9, 64, 64, 6), acts, rng=rng)
    for b in net.biases:
        b[...] = rng.normal(scale=0.1, size=b.shape)
    n = 16
    batch = Batch(rng.normal(size=(n, 9)), rng.integers(0, 6, n), rng.normal(size=n),
                  rng.normal(size=(n, 9)), np.zeros(n, bool))
    targets = rng.normal(size=n)
    q, memory = net.forward(batch.states, cache=True)
    d_out = np.zeros_like(q)
    d_out[np.arange(n), batch.actions] = (q[np.arange(n), batch.actions] - targets) / n
    grad = net.backward(memory, d_out, flat=True)
    assert np.allclose(np.concatenate([g.ravel() for g in net.backward(memory, d_out)]), grad)

    # 100 parameters spread across every layer
    picks = rng.choice(net.flat.size, 100, replace=False)
    eps = 1e-6
    for i in picks:
        saved = net.flat[i]
        net.flat[i] = saved + eps
        hi = loss_fn(net, batch, targets)
        net.flat[i] = saved - eps
        lo = loss_fn(net, batch, targets)
        net.flat[i] = saved
        fd = (hi - lo) / (2 * eps)
        assert abs(fd - grad[i]) <= 1e-4 * max(abs(fd), abs(grad[i])) + 1e-10


def test_optimizers_accept_lists_and_flat_buffers():
    p = [np.ones(3), np.ones((2, 2))]
    SGD(p, 0.5).step([np.ones(3), np.ones((2, 2))])
    assert np.all(p[0] == 0.5)
    flat = np.ones(4)
    Adam(flat, 0.1).step(np.ones(4))
    np.testing.assert_allclose(flat, 0.9, atol=1e-6)


# -- td targets and updates -------------------------------------------------

def test_td_target_examples():
    net = QNetwork((1, 2), ["linear"], bias=False)
    net.weights[0][...] = [[2.0, -1.0]]
    assert td_target(Transition(np.ones(1), 0, 1000.0, np.ones(1), True), net, 0.5) == 1000.0
    assert td_target(Transition(np.ones(1), 0, 3.0, np.ones(1), False), net, 0.0) == 3.0
    assert td_target(Transition(np.ones(1), 0, 1.0, np.ones(1), False), net, 0.5) == 2.0


def one_hot_net():
    return QNetwork((2, 2), ["linear"], bias=False)


def test_tabular_single_update():
    net = one_hot_net()
    t = Transition(np.array([1.0, 0.0]), 0, 1.0, np.array([0.0, 1.0]), False)
    train_step(net, batch_of([t]), SGD(net.flat, 0.1), 0.5)
    assert net.weights[0][0, 0] == pytest.approx(0.1, abs=1e-15)
    assert np.count_nonzero(net.flat) == 1


def test_zero_error_leaves_weights():
    net = one_hot_net()
    net.weights[0][...] = [[1.0, 0.0], [0.0, 0.0]]
    t = Transition(np.array([1.0, 0.0]), 0, 1.0, np.array([0.0, 1.0]), False)
    before = net.flat.copy()
    loss = train_step(net, batch_of([t]), SGD(net.flat, 0.1), 0.5)
    assert loss == 0.0
    assert np.array_equal(net.flat, before)


def test_empty_batch_rejected():
    net = one_hot_net()
    empty = Batch(np.zeros((0, 2)), np.zeros(0, int), np.zeros(0), np.zeros((0, 2)), np.zeros(0, bool))
    with pytest.raises(ValueError):
        train_step(net, empty, SGD(net.flat, 0.1), 0.5)


def test_tabular_fixed_point_matches_value_iteration():
    # deterministic 2-state MDP: next[s][a], reward[s][a]; action 1 in state 1 terminates
    nxt = [[0, 1], [0, 1]]
    rew = [[0.0, 1.0], [2.0, 5.0]]
    term = [[False, False], [False, True]]
    gamma = 0.5
    q = np.zeros((2, 2))
    for _ in range(500):
        q = np.array([[rew[s][a] + (0.0 if term[s][a] else gamma * q[nxt[s][a]].max())
                       for a in range(2)] for s in range(2)])
    eye = np.eye(2)
    transitions = [Transition(eye[s], a, rew[s][a], eye[nxt[s][a]], term[s][a]) for s in range(2) for a in range(2)]
    net = one_hot_net()
    opt = SGD(net.flat, 1.0)
    batch = batch_of(transitions)
    for _ in range(2000):
        train_step(net, batch, opt, gamma)
    np.testing.assert_allclose(net.weights[0], q, atol=1e-6)


def test_target_network_is_used_for_bootstrap():
    net = one_hot_net()
    frozen = one_hot_net()
    frozen.weights[0][...] = 10.0
    t = Transition(np.array([1.0, 0.0]), 0, 0.0, np.array([0.0, 1.0]), False)
    train_step(net, batch_of([t]), SGD(net.flat, 1.0), 0.5, target_net=frozen)
    assert net.weights[0][0, 0] == pytest.approx(5.0)


# -- acting -------------------------------------------------------------------

def test_epsilon_one_is_uniform():
    net = QNetwork((9, 6), rng=np.random.default_rng(0))
    rng = np.random.default_rng(1)
    x = np.zeros(9)
    draws = [select_action(net, x, 1.0, rng) for _ in range(100_000)]
    counts = np.bincount(draws, minlength=6)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_epsilon_zero_is_greedy_and_tie_breaks_low():
    net = QNetwork((1, 6), ["linear"], bias=False)
    net.weights[0][...] = [[0.1, 0.5, -1.0, 0.5, 0.2, 0.0]]
    rng = np.random.default_rng(0)
    assert select_action(net, np.ones(1), 0.0, rng) == 1
    assert select_action(QNetwork((1, 6)), np.ones(1), 0.0, rng) == 0
    net.weights[0][...] = np.exp(net.weights[0]) * 3.0 + 7.0
    assert select_action(net, np.ones(1), 0.0, rng) == 1


def test_epsilon_schedules():
    verbatim = Hyperparameters(epsilon_schedule="per-episode")
    for k in range(40):
        assert epsilon_at(k, verbatim) == max(0.0, 1.0 - 0.05 * k)
    linear = Hyperparameters(episodes=1000, epsilon_decay_fraction=0.1, epsilon_floor=0.0)
    assert epsilon_at(0, linear) == 1.0
    assert epsilon_at(50, linear) == pytest.approx(0.5)
    assert epsilon_at(100, linear) == 0.0 and epsilon_at(999, linear) == 0.0
    values = [epsilon_at(k, linear) for k in range(1000)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_hyperparameter_validation():
    for bad in (dict(gamma=1.0), dict(learning_rate=0.0), dict(epsilon_schedule="cosine"),
                dict(optimizer="rmsprop"), dict(batch_size=0), dict(epsilon_floor=2.0),
                dict(select_every=-1), dict(select_trials=0)):
        with pytest.raises(ValueError):
            Hyperparameters(**bad)


# -- replay -------------------------------------------------------------------

def tr(i, n_actions=6):
    return Transition(np.full(9, float(i)), i % n_actions, float(i), np.full(9, i + 0.5), False)


def test_replay_small_capacity_evicts_first():
    mem = ReplayMemory(3)
    for i in range(4):
        mem.push(tr(i))
    assert len(mem) == 3
    assert [t.reward for t in mem] == [1.0, 2.0, 3.0]


def test_replay_fifo_over_many_pushes():
    mem = ReplayMemory(20_000)
    for i in range(100_000):
        mem.push(tr(i))
        assert len(mem) <= 20_000
    seqs = mem.seq[mem._order()]
    np.testing.assert_array_equal(seqs, np.arange(80_000, 100_000))
    assert [t.reward for t in list(mem)[:3]] == [80_000.0, 80_001.0, 80_002.0]


def test_replay_rejects_bad_action():
    with pytest.raises(ValueError):
        ReplayMemory(4).push(Transition(np.zeros(9), 6, 0.0, np.zeros(9), False))


def test_sampling():
    mem = ReplayMemory(100)
    with pytest.raises(MemoryNotReady):
        mem.sample(64, np.random.default_rng(0))
    for i in range(64):
        mem.push(tr(i))
    snapshot = mem.states.copy()
    seen = set()
    rng = np.random.default_rng(0)
    for _ in range(200):
        b = mem.sample(64, rng)
        assert len(set(b.rewards)) == 64  # without replacement
        seen.update(b.rewards)
    assert seen == set(float(i) for i in range(64))
    assert np.array_equal(snapshot, mem.states)
    a = mem.sample(64, np.random.default_rng(9))
    b = mem.sample(64, np.random.default_rng(9))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


@given(st.integers(1, 50), st.integers(0, 200))
def test_replay_size_invariant(capacity, pushes):
    mem = ReplayMemory(capacity)
    for i in range(pushes):
        mem.push(tr(i))
    assert len(mem) == min(capacity, pushes)
    assert [t.reward for t in mem] == [float(i) for i in range(max(0, pushes - capacity), pushes)]


# -- training -----------------------------------------------------------------

def test_single_episode_does_not_learn():
    hyper = Hyperparameters(episodes=1, seed=3)
    agent, metrics = train(EnvConfig(goal_change_prob=0.0), hyper)
    assert metrics.transitions == metrics.steps[0] <= 100
    assert metrics.updates == 0
    assert math.isnan(metrics.mean_loss[0])
    fresh = QNetwork((9, 64, 64, 6), rng=np.random.default_rng(np.random.SeedSequence(3).spawn(4)[0]))
    assert np.array_equal(agent.net.flat, fresh.flat)


def test_train_is_bit_reproducible():
    hyper = Hyperparameters(episodes=100, learning_rate=0.01, seed=5)
    cfg = EnvConfig(goal_change_prob=0.2)
    a1, m1 = train(cfg, hyper)
    a2, m2 = train(cfg, hyper)
    assert np.array_equal(a1.net.flat, a2.net.flat)
    assert m1.steps == m2.steps
    assert m1.accumulated_reward == m2.accumulated_reward
    assert all(s <= 100 for s in m1.steps)
    assert m1.updates > 0
    _, m3 = train(cfg, Hyperparameters(episodes=100, learning_rate=0.01, seed=6))
    assert m3.accumulated_reward != m1.accumulated_reward


def test_target_network_option_runs():
    hyper = Hyperparameters(episodes=25, target_network=True, target_update_steps=10, learning_rate=0.01)
    agent, metrics = train(EnvConfig(goal_change_prob=0.0), hyper)
    assert metrics.updates > 0 and np.all(np.isfinite(agent.net.flat))


def test_snapshot_selection_keeps_best_check(monkeypatch):
    import vinedqn.qlearn.training as training

    scores = iter([(0.0, -100, -3.0), (1.0, -40, -0.05), (1.0, -40, -0.09), (1.0, -40, -0.05), (0.0, -100, -0.1)])
    snapshots = []

    def scripted(agent, cfg, hyper, seed):
        snapshots.append(agent.net.flat.copy())
        return next(scores), 7

    monkeypatch.setattr(training, "_probe_score", scripted)
    hyper = Hyperparameters(episodes=12, warmup_episodes=2, select_every=2, learning_rate=0.01)
    agent, metrics = train(EnvConfig(goal_change_prob=0.0), hyper)
    assert len(snapshots) == 5
    # checks after episodes 3, 5, 7, 9, 11; ties go to the later snapshot
    assert metrics.selected_episode == 9
    assert np.array_equal(agent.net.flat, snapshots[3])
    assert not np.array_equal(agent.net.flat, snapshots[4])
    assert metrics.selection_steps == 35


def test_selection_disabled_returns_last_network():
    hyper = Hyperparameters(episodes=5, warmup_episodes=1, learning_rate=0.01, seed=2)
    _, m = train(EnvConfig(goal_change_prob=0.0), hyper)
    assert m.selected_episode is None and m.selection_steps == 0
    agent, m2 = train(EnvConfig(goal_change_prob=0.0), Hyperparameters(
        episodes=5, warmup_episodes=1, learning_rate=0.01, seed=2, select_every=5))
    # a single check at the very end selects the last network
    assert m2.selected_episode == 4 and m2.selection_steps > 0
    last, _ = train(EnvConfig(goal_change_prob=0.0), hyper)
    assert np.array_equal(agent.net.flat, last.net.flat)


# -- evaluation -------------------------------------------------------------

def zero_agent(cfg):
    return DQNAgent(QNetwork((9, 64, 64, 6)), observation_scale(cfg))


def test_untrained_agent_never_succeeds():
    cfg = EnvConfig(goal_change_prob=0.0, goal=(3.0, -3.0))
    result = evaluate(zero_agent(cfg), cfg, 3, 50, np.random.default_rng(0))
    assert result.success_rate == 0.0
    assert result.steps == [50, 50, 50]
    assert result.steps_hist[0].sum() == 0
    assert result.reward_hist[0].sum() == 3


def test_evaluate_edge_cases():
    cfg = EnvConfig(goal_change_prob=0.0)
    agent = zero_agent(cfg)
    assert evaluate(agent, cfg, 4, 0, np.random.default_rng(0)).success_rate == 0.0
    empty = evaluate(agent, cfg, 0, 100, np.random.default_rng(0))
    assert math.isnan(empty.success_rate)
    assert empty.steps_hist[0].sum() == 0 and empty.reward_hist[0].sum() == 0


def test_evaluate_draws_fresh_goals():
    cfg = EnvConfig(goal_change_prob=0.1)
    result = evaluate(zero_agent(cfg), cfg, 5, 1, np.random.default_rng(0))
    assert len({e.goal for e in result.episodes}) == 5


def test_planner_reaches_fixed_goal():
    cfg = EnvConfig(goal_change_prob=0.0)
    planner = LatticePlanner(cfg)
    result = evaluate(planner, cfg, 2, 100, np.random.default_rng(0))
    assert result.success_rate == 1.0
    assert result.steps[0] <= 40


def test_heatmap_shape_and_range():
    cfg = EnvConfig()
    hm = heatmap(zero_agent(cfg), cfg, GridSpec(), step_limit=5)
    assert hm.normalized.shape == (17, 9)
    np.testing.assert_array_equal(hm.xs, np.arange(0, 4.01, 0.5))
    np.testing.assert_array_equal(hm.ys, np.arange(-4, 4.01, 0.5))
    assert hm.normalized.max() == 1.0 and hm.normalized.min() > 0.0
    assert len(list(hm.rows())) == 17 * 9


def test_heatmap_planner_small_on_reachable_goals():
    cfg = EnvConfig()
    planner = LatticePlanner(cfg)
    hm = heatmap(planner, cfg, GridSpec(), step_limit=200)
    reachable = np.array([[planner.best_distance((x, y)) <= cfg.d_max for x in hm.xs] for y in hm.ys])
    assert reachable.sum() > 20
    assert np.all(hm.final_distance[reachable] <= cfg.d_max)
    assert np.all(hm.normalized[reachable] <= cfg.d_max / hm.final_distance.max())


# -- checkpoints ------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    cfg = EnvConfig()
    agent = DQNAgent(QNetwork((9, 8, 6), rng=np.random.default_rng(2)), observation_scale(cfg))
    path = tmp_path / "c.json"
    save_checkpoint(path, agent, {"seed": 1})
    loaded, config = load_checkpoint(path, expected_layer_sizes=(9, 8, 6))
    assert config == {"seed": 1}
    assert np.array_equal(loaded.net.flat, agent.net.flat)
    assert np.array_equal(loaded.scale, agent.scale)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_layer_sizes=(9, 64, 64, 6))
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    doc["format_version"] = 1
    doc["weights"][0] = [[0.0]]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
