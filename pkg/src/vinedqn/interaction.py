"""Shape of the segmented robot in contact with a circular obstacle.

The backbone is split into ``N`` sub-segments whose curvatures minimize a
quadratic bending energy (stay close to the commanded curvature, stay
smooth between neighbours) subject to every sub-segment tip keeping a
clearance of ``r_o + r_r`` from the obstacle center.

The constrained problem is solved with a quadratic penalty method: the
penalty weight grows tenfold per outer round and each round is minimized by
damped Gauss-Newton steps with Armijo backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (
    InvalidInputError,
    PlanarPoint,
    PlanarPose,
    SegmentedShape,
    arc_chord,
    chain_positions,
)

__all__ = [
    "Obstacle",
    "InteractionWeights",
    "SolverSettings",
    "SolveReport",
    "objective",
    "clearance",
    "is_colliding",
    "tip_jacobian",
    "resolve_shape",
]


@dataclass(frozen=True)
class Obstacle:
    center: PlanarPoint
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", PlanarPoint(float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise InvalidInputError(f"obstacle radius must be positive, got {self.radius}")

    def contains(self, point) -> bool:
        return math.hypot(point[0] - self.center.x, point[1] - self.center.y) < self.radius


@dataclass(frozen=True)
class InteractionWeights:
    """Energy weights and discretization of the contact model.

    ``gamma1`` penalizes deviation from the commanded curvature, ``gamma2``
    curvature jumps between neighbouring sub-segments.
    """

    gamma1: float = 1.0
    gamma2: float = 10.0
    robot_radius: float = 0.05
    n_segments: int = 20

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise InvalidInputError("gamma1 and gamma2 must be positive")
        if not self.robot_radius >= 0:
            raise InvalidInputError("robot_radius must be non-negative")
        if int(self.n_segments) != self.n_segments or self.n_segments < 2:
            raise InvalidInputError("n_segments must be an integer >= 2")


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-4
    rel_tolerance: float = 1e-8
    initial_penalty: float = 1e3
    penalty_growth: float = 10.0
    outer_rounds: int = 5
    max_inner: int = 500


@dataclass
class SolveReport:
    """Outcome of :func:`resolve_shape`.

    ``merit_history`` holds one list per penalty round with the penalized
    merit after every accepted inner step; each list is non-increasing.
    """

    shape: SegmentedShape
    objective_value: float
    max_violation: float
    iterations: int
    converged: bool
    merit_history: list[list[float]] = field(default_factory=list)


def _difference_matrix(n: int) -> np.ndarray:
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d


def objective(kappas, kappa_t: float, w: InteractionWeights) -> float:
    """Bending energy ``g1 * sum (k_i - k_t)^2 + g2 * sum (k_{i+1} - k_i)^2``."""
    kappas = np.asarray(kappas, dtype=float)
    dev = kappas - kappa_t
    jumps = np.diff(kappas)
    return float(w.gamma1 * np.dot(dev, dev) + w.gamma2 * np.dot(jumps, jumps))


def _margins(points: np.ndarray, obs: Obstacle, r_r: float) -> np.ndarray:
    tips = points[..., 1:, :]
    dist = np.hypot(tips[..., 0] - obs.center.x, tips[..., 1] - obs.center.y)
    return dist - (obs.radius + r_r)


def clearance(shape: SegmentedShape, base: PlanarPose | None, obs: Obstacle, r_r: float) -> np.ndarray:
    """Signed clearance of every sub-segment tip; negative entries are violations."""
    points, _ = chain_positions(shape.kappas, shape.total_length, base)
    return _margins(points, obs, r_r)


def is_colliding(shape: SegmentedShape, base: PlanarPose | None, obs: Obstacle, r_r: float) -> bool:
    return bool(np.any(clearance(shape, base, obs, r_r) < 0.0))


def _chord_derivative(kappas: np.ndarray, ell: float) -> tuple[np.ndarray, np.ndarray]:
    u = kappas * ell
    small = np.abs(u) < 1e-2
    safe = np.where(small, 1.0, kappas)
    u2 = u * u
    d_lat_series = ell * ell * (-0.5 + u2 / 8.0 - u2 * u2 / 144.0)
    d_ax_series = ell * ell * (-u / 3.0 + u * u2 / 30.0 - u * u2 * u2 / 840.0)
    d_lat = np.where(small, d_lat_series, (1.0 - np.cos(u) - u * np.sin(u)) / (safe * safe))
    d_ax = np.where(small, d_ax_series, (u * np.cos(u) - np.sin(u)) / (safe * safe))
    return d_lat, d_ax


def tip_jacobian(kappas, total_length: float, base: PlanarPose | None = None):
    """Tip positions and their derivatives with respect to every curvature.

    Returns
    -------
    points : (N + 1, 2) array
    jac : (N, N, 2) array
        ``jac[i, j]`` is d(tip of sub-segment i)/d(kappa_j); zero for ``j > i``.
    """
    kappas = np.asarray(kappas, dtype=float)
    n = kappas.size
    ell = total_length / n
    points, headings = chain_positions(kappas, total_length, base)
    d_lat, d_ax = _chord_derivative(kappas, ell)
    c, s = np.cos(headings[:-1]), np.sin(headings[:-1])
    own = np.stack([c * d_lat - s * d_ax, s * d_lat + c * d_ax], axis=-1)  # (N, 2)
    tips = points[1:]
    # rotating everything downstream of segment j: ell * J (p_i - p_{j+1}), J = [[0, -1], [1, 0]]
    rel = tips[:, None, :] - tips[None, :, :]
    jac = np.empty((n, n, 2))
    jac[..., 0] = -ell * rel[..., 1]
    jac[..., 1] = ell * rel[..., 0]
    jac += own[None, :, :]
    jac *= np.tril(np.ones((n, n)))[..., None]
    return points, jac


class _PenaltyProblem:
    def __init__(self, kappa_t, s, w, obs, base):
        self.kappa_t = kappa_t
        self.s = s
        self.w = w
        self.obs = obs
        self.base = base
        n = w.n_segments
        d = _difference_matrix(n)
        self.hess_f = 2.0 * w.gamma1 * np.eye(n) + 2.0 * w.gamma2 * d.T @ d
        self.rmin = obs.radius + w.robot_radius

    def energy(self, kappas):
        return objective(kappas, self.kappa_t, self.w)

    def margins(self, kappas):
        points, _ = chain_positions(kappas, self.s, self.base)
        return _margins(points, self.obs, self.w.robot_radius)

    def merit(self, kappas, mu):
        viol = np.minimum(self.margins(kappas), 0.0)
        return self.energy(kappas) + mu * float(np.dot(viol, viol))

    def linearize(self, kappas):
        points, jac = tip_jacobian(kappas, self.s, self.base)
        delta = points[1:] - np.asarray(self.obs.center)
        dist = np.hypot(delta[:, 0], delta[:, 1])
        normal = np.empty_like(delta)
        ok = dist > 1e-12
        normal[ok] = delta[ok] / dist[ok, None]
        # tip exactly on the center: push along +x of the workspace
        normal[~ok] = (1.0, 0.0)
        grad_g = np.einsum("ijk,ik->ij", jac, normal)
        return dist - self.rmin, grad_g


def _minimize_round(problem: _PenaltyProblem, kappas, mu, settings: SolverSettings):
    merit = problem.merit(kappas, mu)
    history = [merit]
    iters = 0
    for _ in range(settings.max_inner):
        g, grad_g = problem.linearize(kappas)
        active = g < 0.0
        grad = problem.hess_f @ (kappas - problem.kappa_t)
        hess = problem.hess_f.copy()
        if np.any(active):
            ja = grad_g[active]
            grad = grad + 2.0 * mu * ja.T @ g[active]
            hess += 2.0 * mu * ja.T @ ja
        step = np.linalg.solve(hess, -grad)
        slope = float(grad @ step)
        if slope >= 0.0:
            break
        t = 1.0
        accepted = False
        for _ in range(40):
            trial = kappas + t * step
            trial_merit = problem.merit(trial, mu)
            if trial_merit <= merit + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        iters += 1
        change = merit - trial_merit
        kappas, merit = trial, trial_merit
        history.append(merit)
        if change <= settings.rel_tolerance * max(abs(merit), 1e-12):
            break
    return kappas, iters, history


def resolve_shape(
    kappa_t: float,
    s: float,
    w: InteractionWeights,
    obs: Obstacle,
    base: PlanarPose | None = None,
    settings: SolverSettings = SolverSettings(),
) -> SolveReport:
    """Minimum-energy segmented shape that keeps clear of ``obs``.

    If the uniform arc with curvature ``kappa_t`` already clears the obstacle
    it is returned unchanged with zero iterations.

    Parameters
    ----------
    kappa_t : float
        Commanded (obstacle-free) curvature, 1/m.
    s : float
        Total robot length, m; must be positive.
    w : InteractionWeights
    obs : Obstacle
    base : PlanarPose, optional
        Pose of the robot base; defaults to the origin heading ``+y``.
    settings : SolverSettings, optional

    Returns
    -------
    SolveReport
        ``converged`` is False when the final clearance violation still
        exceeds ``settings.tolerance``; the best shape found is returned.
    """
    if not (math.isfinite(kappa_t) and math.isfinite(s)) or s <= 0:
        raise InvalidInputError(f"need finite kappa_t and s > 0, got {kappa_t}, {s}")
    n = w.n_segments
    kappas = np.full(n, float(kappa_t))
    problem = _PenaltyProblem(float(kappa_t), float(s), w, obs, base)
    g0 = problem.margins(kappas)
    if np.all(g0 >= 0.0):
        return SolveReport(SegmentedShape(kappas, s), 0.0, 0.0, 0, True, [[0.0]])

    mu = settings.initial_penalty
    total_iters = 0
    histories = []
    violation = float(-np.min(g0))
    for _ in range(settings.outer_rounds):
        kappas, iters, history = _minimize_round(problem, kappas, mu, settings)
        total_iters += iters
        histories.append(history)
        violation = max(0.0, float(-np.min(problem.margins(kappas))))
        if violation <= settings.tolerance:
            break
        mu *= settings.penalty_growth
    return SolveReport(
        shape=SegmentedShape(kappas, s),
        objective_value=problem.energy(kappas),
        max_violation=violation,
        iterations=total_iters,
        converged=violation <= settings.tolerance,
        merit_history=histories,
    )
