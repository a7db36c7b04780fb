"""Greedy rollouts, success statistics and goal-error heatmaps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..environment import EnvConfig, VineEnv
from ..kinematics import chain_positions

__all__ = [
    "Episode",
    "EvalResult",
    "GridSpec",
    "Heatmap",
    "LatticePlanner",
    "rollout",
    "evaluate",
    "heatmap",
    "histogram",
]


@dataclass
class Episode:
    goal: tuple[float, float]
    reached: bool
    steps: int
    accumulated_reward: float
    discounted_return: float
    final_distance: float
    rows: list[dict] = field(default_factory=list)
    backbones: list[np.ndarray] = field(default_factory=list)


def _backbone(env: VineEnv) -> np.ndarray:
    if env.shape is not None:
        points, _ = chain_positions(env.shape.kappas, env.shape.total_length)
    else:
        n = env.cfg.interaction.n_segments
        points, _ = chain_positions(np.full(n, env.kappa), env.s)
    return points


def rollout(policy, env: VineEnv, step_limit: int, gamma: float = 0.5, record: bool = False) -> Episode:
    """Run one greedy episode from ``env.reset()``-like state already prepared by the caller.

    The caller sets the goal and resets; this steps ``policy`` until the goal
    is captured or ``step_limit`` steps have been taken.
    """
    obs = env.observation()
    total = discounted = 0.0
    reached = False
    rows = []
    backbones = [_backbone(env)] if record else []
    for k in range(step_limit):
        a = policy(obs)
        obs, r, done, info = env.step(a)
        total += r
        discounted += gamma**k * r
        reached = info["reached"]
        if record:
            rows.append({
                "step": info["step"], "s_m": env.s, "kappa_per_m": env.kappa,
                "s_rate_m_per_s": env.s_rate, "kappa_rate_per_m_s": env.kappa_rate,
                "tip_x_m": env.tip.x, "tip_y_m": env.tip.y, "d_m": env.distance,
                "reward": r, "action_index": info["action"], "collision": int(info["collision"]),
            })
            backbones.append(_backbone(env))
        if done:
            break
    return Episode(tuple(env.goal), reached, env.steps, total, discounted, env.distance, rows, backbones)


def histogram(values, bins):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return counts, edges


@dataclass
class EvalResult:
    success_rate: float
    episodes: list[Episode]
    steps_hist: tuple[np.ndarray, np.ndarray]
    reward_hist: tuple[np.ndarray, np.ndarray]

    @property
    def steps(self) -> list[int]:
        return [e.steps for e in self.episodes]

    @property
    def rewards(self) -> list[float]:
        return [e.accumulated_reward for e in self.episodes]


def evaluate(policy, cfg: EnvConfig, trials: int, step_limit: int, rng: np.random.Generator,
             gamma: float = 0.5, record: bool = False) -> EvalResult:
    """Greedy evaluation over ``trials`` episodes.

    With ``cfg.goal_change_prob > 0`` every trial gets a freshly drawn goal,
    otherwise ``cfg.goal`` is used throughout. ``success_rate`` is NaN for
    zero trials.
    """
    env = VineEnv(replace(cfg, max_steps=max(step_limit, 1), goal_change_prob=0.0), rng)
    episodes = []
    for _ in range(trials):
        if cfg.goal_change_prob > 0.0:
            env.set_goal(env.draw_goal())
        env.reset()
        if step_limit == 0:
            episodes.append(Episode(tuple(env.goal), False, 0, 0.0, 0.0, env.distance))
            continue
        episodes.append(rollout(policy, env, step_limit, gamma, record))
    rate = float(np.mean([e.reached for e in episodes])) if episodes else math.nan
    step_bins = np.arange(0, max(step_limit, 1) + 10, 10)
    reward_bins = np.linspace(-2000.0, 1000.0, 31)
    return EvalResult(
        rate,
        episodes,
        histogram([e.steps for e in episodes if e.reached], step_bins),
        histogram([e.accumulated_reward for e in episodes], reward_bins),
    )


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float] = (0.0, 4.0)
    y_range: tuple[float, float] = (-4.0, 4.0)
    spacing: float = 0.5

    def axes(self):
        def axis(lo, hi):
            n = int(round((hi - lo) / self.spacing))
            return lo + self.spacing * np.arange(n + 1)
        return axis(*self.x_range), axis(*self.y_range)


@dataclass
class Heatmap:
    xs: np.ndarray
    ys: np.ndarray
    final_distance: np.ndarray  # (len(ys), len(xs))
    normalized: np.ndarray

    def rows(self):
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                yield {"goal_x_m": float(x), "goal_y_m": float(y),
                       "final_d_m": float(self.final_distance[j, i]),
                       "normalized_error": float(self.normalized[j, i])}


def heatmap(policy, cfg: EnvConfig, grid: GridSpec = GridSpec(), step_limit: int = 200) -> Heatmap:
    """Final tip-goal distance of a greedy rollout for every goal on ``grid``,
    normalized by the largest value on the grid."""
    xs, ys = grid.axes()
    env = VineEnv(replace(cfg, max_steps=max(step_limit, 1), goal_change_prob=0.0))
    final = np.empty((len(ys), len(xs)))
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            env.set_goal((x, y))
            env.reset()
            if step_limit == 0:
                final[j, i] = env.distance
            else:
                final[j, i] = rollout(policy, env, step_limit).final_distance
    peak = final.max() if final.size else 0.0
    normalized = final / peak if peak > 0 else np.zeros_like(final)
    return Heatmap(xs, ys, final, normalized)


class LatticePlanner:
    """Model-based reference policy that knows the simulator.

    Starting from ``(s0, kappa0)`` the reachable ``(s, kappa)`` states form a
    lattice (curvature moves by ``rate * dt``, length by ``growth * dt``).
    For each goal the planner picks the lattice state whose tip (contact
    shape included) lies closest to the goal, first bends to its curvature
    and then grows to its length. Used as an upper-bound baseline.
    """

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self._env = VineEnv(replace(cfg, goal_change_prob=0.0))
        self._kappas = self._curvature_values()
        self._lengths = self._length_values()
        self._tips = self._tip_table()
        self._plan_goal = None
        self._target = None
        self._last_s = None

    def _curvature_values(self):
        cfg = self.cfg
        lo, hi = cfg.kappa_bounds
        values = [cfg.kappa0]
        for rate in (cfg.kappa_left, cfg.kappa_right):
            k = cfg.kappa0
            while rate != 0.0:
                k_new = min(max(k + rate * cfg.dt, lo), hi)
                if k_new == k:
                    break
                values.append(k_new)
                k = k_new
        return np.array(sorted(values))

    def _length_values(self):
        cfg = self.cfg
        values = [cfg.s0]
        s = cfg.s0
        while cfg.growth_rate > 0 and s < cfg.s_max:
            s = min(s + cfg.growth_rate * cfg.dt, cfg.s_max)
            values.append(s)
        return np.array(values)

    def _tip_table(self):
        kk, ss = np.meshgrid(self._kappas, self._lengths, indexing="ij")
        if self.cfg.obstacle is None:
            u = kk * ss
            safe = np.where(np.abs(kk) < 1e-12, 1.0, kk)
            x = np.where(np.abs(kk) < 1e-12, 0.0, (np.cos(u) - 1.0) / safe)
            y = np.where(np.abs(kk) < 1e-12, ss, np.sin(u) / safe)
            return np.stack([x, y], axis=-1)
        tips = np.empty(kk.shape + (2,))
        for i, k in enumerate(self._kappas):
            for j, s in enumerate(self._lengths):
                shape = self._env.resolve(float(k), float(s)).shape
                points, _ = chain_positions(shape.kappas, shape.total_length)
                tips[i, j] = points[-1]
        return tips

    def best_distance(self, goal) -> float:
        d = np.hypot(self._tips[..., 0] - goal[0], self._tips[..., 1] - goal[1])
        return float(d.min())

    def __call__(self, obs) -> int:
        s, kappa, goal = obs[0], obs[1], (obs[4], obs[5])
        new_episode = self._last_s is None or s < self._last_s - 1e-9
        self._last_s = s
        if new_episode or self._plan_goal != goal:
            d = np.hypot(self._tips[..., 0] - goal[0], self._tips[..., 1] - goal[1])
            # only lengths not shorter than the current one are reachable
            d[:, self._lengths < s - 1e-9] = np.inf
            i, j = np.unravel_index(np.argmin(d), d.shape)
            self._target = (self._kappas[i], self._lengths[j])
            self._plan_goal = goal
        k_target, s_target = self._target
        if k_target > kappa + 1e-9:
            return 4 if self.cfg.kappa_right > 0 else 0
        if k_target < kappa - 1e-9:
            return 0 if self.cfg.kappa_left < 0 else 4
        if s < s_target - 1e-9:
            return 3
        return 2
