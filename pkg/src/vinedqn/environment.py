"""Episodic goal-reaching environment for the planar vine robot.

The agent commands a curvature rate and a growth rate from a fixed table
of six actions. Each step integrates ``(s, kappa)`` with explicit Euler,
optionally resolves the contact shape against the obstacle and returns the
9-dimensional observation ``[s, kappa, s_rate, kappa_rate, goal_x, goal_y,
obstacle_x, obstacle_y, distance]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .interaction import InteractionWeights, Obstacle, SolveReport, resolve_shape
from .kinematics import Configuration, PlanarPoint, SegmentedShape, chain_positions, planar_tip

__all__ = [
    "GOAL_REWARD",
    "Action",
    "EnvConfig",
    "StepResult",
    "EpisodeFinishedError",
    "VineEnv",
    "action_set",
    "reward",
    "write_trajectory",
]

GOAL_REWARD = 1000.0
OBS_SIZE = 9
N_ACTIONS = 6


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping an episode that has already terminated."""


class Action(NamedTuple):
    kappa_rate: float
    growth_rate: float
    index: int


@dataclass(frozen=True)
class EnvConfig:
    """Simulation, task and action parameters.

    ``goal`` is the goal used until the first re-draw; ``goal_bounds`` is
    ``((x_lo, x_hi), (y_lo, y_hi))``.
    """

    dt: float = 0.1
    s0: float = 1.0
    kappa0: float = 0.01
    s_max: float = 5.0
    kappa_bounds: tuple[float, float] = (-2.0, 2.0)
    d_max: float = 0.1
    goal: tuple[float, float] = (1.0, 3.0)
    goal_bounds: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 4.0), (-4.0, 4.0))
    goal_change_prob: float = 0.2
    obstacle: Obstacle | None = None
    redraw_goal_in_obstacle: bool = True
    max_steps: int = 100
    kappa_left: float = -0.5
    kappa_right: float = 0.5
    growth_rate: float = 0.6
    interaction: InteractionWeights = field(default_factory=InteractionWeights)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.d_max > 0:
            raise ValueError("d_max must be positive")
        if not 0 < self.s0 <= self.s_max:
            raise ValueError("s0 must lie in (0, s_max]")
        if not 0.0 <= self.goal_change_prob <= 1.0:
            raise ValueError("goal_change_prob must lie in [0, 1]")
        lo, hi = self.kappa_bounds
        if not lo <= self.kappa0 <= hi:
            raise ValueError("kappa0 outside kappa_bounds")
        if self.growth_rate < 0:
            raise ValueError("growth is irreversible; growth_rate must be >= 0")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


def reward(d: float, d_max: float) -> float:
    """Step reward: ``+1000`` inside the capture radius, log-shaped penalty outside."""
    if d <= d_max:
        return GOAL_REWARD
    return 1.0 - math.log1p(d) / math.log1p(d_max)


def action_set(cfg: EnvConfig) -> tuple[Action, ...]:
    """The six (curvature rate, growth rate) pairs, in fixed index order.

    0: bend left, hold length     1: bend left, grow
    2: no bend, hold length       3: no bend, grow
    4: bend right, hold length    5: bend right, grow
    """
    pairs = [
        (cfg.kappa_left, 0.0),
        (cfg.kappa_left, cfg.growth_rate),
        (0.0, 0.0),
        (0.0, cfg.growth_rate),
        (cfg.kappa_right, 0.0),
        (cfg.kappa_right, cfg.growth_rate),
    ]
    return tuple(Action(k, g, i) for i, (k, g) in enumerate(pairs))


class VineEnv:
    """Single-robot environment; not thread-safe (holds the episode state).

    Parameters
    ----------
    cfg : EnvConfig
    rng : numpy.random.Generator
        Used only for goal re-draws.
    """

    def __init__(self, cfg: EnvConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng()
        self.actions = action_set(cfg)
        self.goal = PlanarPoint(*map(float, cfg.goal))
        self._shape_cache: dict[tuple[float, float], SolveReport] = {}
        self.s = cfg.s0
        self.kappa = cfg.kappa0
        self.s_rate = 0.0
        self.kappa_rate = 0.0
        self.steps = 0
        self.done = False
        self.shape: SegmentedShape | None = None
        self.collision = False
        self.tip = PlanarPoint(0.0, 0.0)

    # -- goals -------------------------------------------------------------
    def draw_goal(self) -> PlanarPoint:
        (xlo, xhi), (ylo, yhi) = self.cfg.goal_bounds
        while True:
            goal = PlanarPoint(float(self.rng.uniform(xlo, xhi)), float(self.rng.uniform(ylo, yhi)))
            obs = self.cfg.obstacle
            if obs is None or not self.cfg.redraw_goal_in_obstacle or not obs.contains(goal):
                return goal

    def set_goal(self, goal) -> None:
        self.goal = PlanarPoint(float(goal[0]), float(goal[1]))

    # -- shape -------------------------------------------------------------
    def resolve(self, kappa: float, s: float) -> SolveReport:
        """Contact shape for ``(kappa, s)``; memoized since the solver is pure."""
        key = (round(kappa, 10), round(s, 10))
        report = self._shape_cache.get(key)
        if report is None:
            report = resolve_shape(kappa, s, self.cfg.interaction, self.cfg.obstacle)
            self._shape_cache[key] = report
        return report

    def _update_tip(self) -> None:
        if self.cfg.obstacle is None:
            self.tip = planar_tip(Configuration(self.s, self.kappa))
            self.shape = None
            self.collision = False
            return
        report = self.resolve(self.kappa, self.s)
        self.shape = report.shape
        self.collision = report.iterations > 0
        points = _chain_tip(report.shape)
        self.tip = PlanarPoint(*points)

    @property
    def distance(self) -> float:
        return math.hypot(self.tip.x - self.goal.x, self.tip.y - self.goal.y)

    def observation(self) -> np.ndarray:
        obs = self.cfg.obstacle
        ox, oy = (obs.center.x, obs.center.y) if obs is not None else (0.0, 0.0)
        return np.array(
            [self.s, self.kappa, self.s_rate, self.kappa_rate,
             self.goal.x, self.goal.y, ox, oy, self.distance]
        )

    # -- episode -----------------------------------------------------------
    def reset(self) -> np.ndarray:
        """Start a new episode; re-draws the goal with ``goal_change_prob``."""
        cfg = self.cfg
        if cfg.goal_change_prob > 0.0 and self.rng.random() < cfg.goal_change_prob:
            self.goal = self.draw_goal()
        self.s, self.kappa = cfg.s0, cfg.kappa0
        self.s_rate = self.kappa_rate = 0.0
        self.steps = 0
        self.done = False
        self._update_tip()
        return self.observation()

    def step(self, action: int | Action) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("episode already finished; call reset()")
        if not isinstance(action, Action):
            action = self.actions[int(action)]
        cfg = self.cfg
        lo, hi = cfg.kappa_bounds
        self.kappa = min(max(self.kappa + action.kappa_rate * cfg.dt, lo), hi)
        self.s = min(self.s + action.growth_rate * cfg.dt, cfg.s_max)
        self.kappa_rate, self.s_rate = action.kappa_rate, action.growth_rate
        self.steps += 1
        self._update_tip()
        d = self.distance
        r = reward(d, cfg.d_max)
        self.done = d <= cfg.d_max or self.steps >= cfg.max_steps
        info = {
            "shape": self.shape,
            "collision": self.collision,
            "step": self.steps,
            "tip": self.tip,
            "reached": d <= cfg.d_max,
            "action": action.index,
        }
        return StepResult(self.observation(), r, self.done, info)


def _chain_tip(shape: SegmentedShape) -> tuple[float, float]:
    points, _ = chain_positions(shape.kappas, shape.total_length)
    return float(points[-1, 0]), float(points[-1, 1])


TRAJECTORY_COLUMNS = (
    "step", "s_m", "kappa_per_m", "s_rate_m_per_s", "kappa_rate_per_m_s",
    "tip_x_m", "tip_y_m", "d_m", "reward", "action_index", "collision",
)


def write_trajectory(path, rows) -> None:
    """Write per-step rows (dicts keyed by ``TRAJECTORY_COLUMNS``) as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
