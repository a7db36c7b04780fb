"""Deep Q-learning: epsilon-greedy acting, TD targets, and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..environment import N_ACTIONS, OBS_SIZE, EnvConfig, VineEnv
from .evaluation import evaluate
from .network import QNetwork, make_optimizer
from .replay import Batch, ReplayMemory, Transition

__all__ = [
    "Hyperparameters",
    "TrainMetrics",
    "DQNAgent",
    "observation_scale",
    "epsilon_at",
    "select_action",
    "td_target",
    "train_step",
    "train",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperparameters:
    """Learning setup.

    ``epsilon_schedule`` is ``"per-episode"`` (subtract ``epsilon_decrement``
    after every episode) or ``"linear"`` (reach ``epsilon_floor`` after
    ``epsilon_decay_fraction`` of all episodes).
    """

    capacity: int = 20000
    episodes: int = 200000
    max_episode_steps: int = 100
    warmup_episodes: int = 20
    batch_size: int = 64
    epsilon_start: float = 1.0
    epsilon_decrement: float = 0.05
    epsilon_floor: float = 0.0
    epsilon_schedule: str = "linear"
    epsilon_decay_fraction: float = 0.1
    gamma: float = 0.5
    learning_rate: float = 0.1
    optimizer: str = "adam"
    hidden_sizes: tuple[int, ...] = (64, 64)
    eval_step_limit: int = 200
    target_network: bool = False
    target_update_steps: int = 1000
    select_every: int = 0
    select_trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.epsilon_schedule not in ("linear", "per-episode"):
            raise ValueError(f"unknown epsilon schedule {self.epsilon_schedule!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        for name in ("capacity", "episodes", "max_episode_steps", "batch_size", "eval_step_limit",
                     "select_every", "select_trials"):
            if getattr(self, name) < 0 or (name in ("capacity", "batch_size", "select_trials")
                                           and getattr(self, name) == 0):
                raise ValueError(f"{name} out of range")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epsilon_decrement < 0 or not 0 <= self.epsilon_floor <= self.epsilon_start:
            raise ValueError("epsilon schedule must be non-increasing")


@dataclass
class TrainMetrics:
    steps: list[int] = field(default_factory=list)
    accumulated_reward: list[float] = field(default_factory=list)
    discounted_return: list[float] = field(default_factory=list)
    mean_loss: list[float] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    reached: list[bool] = field(default_factory=list)
    transitions: int = 0
    updates: int = 0
    selection_steps: int = 0
    selected_episode: int | None = None

    def __len__(self):
        return len(self.steps)

    def rows(self):
        for i in range(len(self)):
            yield {
                "episode": i,
                "steps": self.steps[i],
                "accumulated_reward": self.accumulated_reward[i],
                "discounted_return": self.discounted_return[i],
                "mean_loss": self.mean_loss[i],
                "epsilon": self.epsilon[i],
                "reached": int(self.reached[i]),
            }


def observation_scale(cfg: EnvConfig) -> np.ndarray:
    """Per-field divisors bringing observations to order one."""
    workspace = cfg.s_max
    kappa_scale = max(abs(cfg.kappa_bounds[0]), abs(cfg.kappa_bounds[1]))
    rate_scale = max(abs(cfg.kappa_left), abs(cfg.kappa_right)) or 1.0
    growth_scale = cfg.growth_rate or 1.0
    return np.array([workspace, kappa_scale, growth_scale, rate_scale,
                     workspace, workspace, workspace, workspace, workspace])


@dataclass
class DQNAgent:
    """Network plus the input normalization it was trained with.

    Calling the agent with a raw observation returns the greedy action.
    """

    net: QNetwork
    scale: np.ndarray

    def normalize(self, obs) -> np.ndarray:
        return np.asarray(obs, dtype=float) / self.scale

    def q_values(self, obs) -> np.ndarray:
        return self.net.forward(self.normalize(obs))

    def __call__(self, obs) -> int:
        return int(np.argmax(self.q_values(obs)))


def epsilon_at(episode: int, hyper: Hyperparameters) -> float:
    if hyper.epsilon_schedule == "per-episode":
        return max(hyper.epsilon_floor, hyper.epsilon_start - hyper.epsilon_decrement * episode)
    decay_episodes = max(1, round(hyper.epsilon_decay_fraction * hyper.episodes))
    frac = min(1.0, episode / decay_episodes)
    return max(hyper.epsilon_floor, hyper.epsilon_start + frac * (hyper.epsilon_floor - hyper.epsilon_start))


def select_action(net: QNetwork, x: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; greedy ties resolve to the lowest index."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(net.n_outputs))
    return int(np.argmax(net.forward(x)))


def td_target(t: Transition, net: QNetwork, gamma: float) -> float:
    if t.done:
        return float(t.reward)
    return float(t.reward + gamma * np.max(net.forward(t.next_state)))


def train_step(net: QNetwork, batch: Batch, optimizer, gamma: float, target_net: QNetwork | None = None) -> float:
    """One gradient step on ``mean(0.5 * (target - Q(s, a))**2)``.

    Targets are treated as constants. Returns the loss before the update.
    """
    n = len(batch.actions)
    if n == 0:
        raise ValueError("empty minibatch")
    if target_net is None:
        # one pass over states and next states; only the first half is differentiated
        q_all, memory = net.forward(np.concatenate([batch.states, batch.next_states]), cache=True)
        q, q_next = q_all[:n], q_all[n:]
        memory = [m[:n] for m in memory]
    else:
        q_next = target_net.forward(batch.next_states)
        q, memory = net.forward(batch.states, cache=True)
    targets = batch.rewards + gamma * np.max(q_next, axis=1) * (~batch.dones.astype(bool))
    rows = np.arange(n)
    err = q[rows, batch.actions] - targets
    loss = 0.5 * float(np.mean(err * err))
    d_out = np.zeros_like(q)
    d_out[rows, batch.actions] = err / n
    optimizer.step(net.backward(memory, d_out, flat=True))
    return loss


def _spawn(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _probe_score(agent, cfg: EnvConfig, hyper: Hyperparameters, probe_seed) -> tuple[tuple, int]:
    # same probe goals at every check so snapshots are comparable
    result = evaluate(agent, cfg, hyper.select_trials, hyper.max_episode_steps,
                      np.random.default_rng(probe_seed), hyper.gamma)
    steps = [e.steps for e in result.episodes]
    final = np.mean([e.final_distance for e in result.episodes])
    return (result.success_rate, -float(np.mean(steps)), -final), sum(steps)


def train(env_cfg: EnvConfig, hyper: Hyperparameters, progress=None):
    """Run the full DQN protocol.

    Episodes are collected with epsilon-greedy actions; after
    ``hyper.warmup_episodes`` every environment step triggers one minibatch
    update. Returns ``(agent, metrics)``. ``progress`` is called with
    ``(episode, metrics)`` after every episode if given.

    Snapshot selection (``hyper.select_every``) ranks checks by probe success
    rate, then mean episode length, then mean final distance; ties go to the
    later snapshot.
    """
    init_rng, env_rng, explore_rng, sample_rng = _spawn(hyper.seed, 4)
    cfg = replace(env_cfg, max_steps=hyper.max_episode_steps)
    env = VineEnv(cfg, env_rng)
    net = QNetwork((OBS_SIZE, *hyper.hidden_sizes, N_ACTIONS), rng=init_rng)
    agent = DQNAgent(net, observation_scale(cfg))
    optimizer = make_optimizer(hyper.optimizer, net.flat, hyper.learning_rate)
    target_net = net.copy() if hyper.target_network else None
    memory = ReplayMemory(hyper.capacity, OBS_SIZE, N_ACTIONS)
    metrics = TrainMetrics()
    updates = 0
    probe_seed = np.random.SeedSequence(hyper.seed).spawn(6)[5]
    best = None

    for episode in range(hyper.episodes):
        eps = epsilon_at(episode, hyper)
        x = agent.normalize(env.reset())
        learning = episode >= hyper.warmup_episodes
        total = discounted = 0.0
        losses = []
        reached = False
        k = 0
        while not env.done:
            a = select_action(net, x, eps, explore_rng)
            obs, r, done, info = env.step(a)
            x_next = agent.normalize(obs)
            reached = info["reached"]
            # time-limit truncation is not a terminal state
            memory.push(Transition(x, a, r, x_next, reached))
            metrics.transitions += 1
            total += r
            discounted += hyper.gamma**k * r
            k += 1
            x = x_next
            if learning and len(memory) >= hyper.batch_size:
                batch = memory.sample(hyper.batch_size, sample_rng)
                losses.append(train_step(net, batch, optimizer, hyper.gamma, target_net))
                updates += 1
                metrics.updates = updates
                if target_net is not None and updates % hyper.target_update_steps == 0:
                    target_net = net.copy()
        metrics.steps.append(env.steps)
        metrics.accumulated_reward.append(total)
        metrics.discounted_return.append(discounted)
        metrics.mean_loss.append(float(np.mean(losses)) if losses else math.nan)
        metrics.epsilon.append(eps)
        metrics.reached.append(bool(reached))
        if hyper.select_every and (episode + 1) % hyper.select_every == 0 and learning:
            score, used = _probe_score(agent, cfg, hyper, probe_seed)
            metrics.selection_steps += used
            if best is None or score >= best[0]:
                best = (score, net.flat.copy())
                metrics.selected_episode = episode
        if progress is not None:
            progress(episode, metrics)
    if best is not None:
        net.flat[:] = best[1]
    return agent, metrics
