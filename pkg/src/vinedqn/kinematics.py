"""Constant-curvature forward kinematics of a growing (vine) robot.

The robot is a single extensible arc described by its length ``s``,
curvature ``kappa`` and curvature-plane angle ``phi``. With ``phi = 0`` the
backbone lives in the (x, z) plane; throughout the package that plane is
called the *planar workspace* with coordinates ``(x, y) := (x, z)``. The
base sits at the origin and the robot initially grows along ``+y``. A
positive curvature bends the backbone towards ``-x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "SERIES_THRESHOLD",
    "InvalidInputError",
    "UnsupportedConfigurationError",
    "Configuration",
    "PlanarPoint",
    "PlanarPose",
    "SegmentedShape",
    "tip_transform",
    "tip_position",
    "planar_tip",
    "arc_chord",
    "chain_positions",
    "chain_poses",
    "normalize_angle",
]

# |kappa * s| below which the Taylor branches are used.
SERIES_THRESHOLD = 1e-6


class InvalidInputError(ValueError):
    """Raised for non-finite or out-of-domain kinematic inputs."""


class UnsupportedConfigurationError(ValueError):
    """Raised when a planar-only routine receives ``phi != 0``."""


@dataclass(frozen=True)
class Configuration:
    """Shape state of the single-arc robot.

    Attributes
    ----------
    s : float
        Arc length in meters, ``s >= 0``.
    kappa : float
        Signed curvature in 1/m.
    phi : float
        Curvature-plane angle in radians. Always 0 inside the simulator.
    """

    s: float
    kappa: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ("s", "kappa", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.s < 0:
            raise InvalidInputError(f"s must be non-negative, got {self.s}")


class PlanarPoint(NamedTuple):
    x: float
    y: float


class PlanarPose(NamedTuple):
    """Position plus heading; heading 0 means the local tangent is ``+y``."""

    position: PlanarPoint
    heading: float


@dataclass(frozen=True)
class SegmentedShape:
    """Backbone split into ``N`` equal-length sub-segments of individual curvature."""

    kappas: np.ndarray
    total_length: float

    def __post_init__(self):
        kappas = np.asarray(self.kappas, dtype=float).reshape(-1)
        if kappas.size < 1:
            raise InvalidInputError("a segmented shape needs at least one sub-segment")
        if not np.all(np.isfinite(kappas)) or not math.isfinite(self.total_length):
            raise InvalidInputError("segmented shape must be finite")
        if self.total_length < 0:
            raise InvalidInputError("total_length must be non-negative")
        kappas.setflags(write=False)
        object.__setattr__(self, "kappas", kappas)

    @property
    def n(self) -> int:
        return int(self.kappas.size)

    @property
    def segment_length(self) -> float:
        return self.total_length / self.n

    @classmethod
    def uniform(cls, kappa: float, total_length: float, n: int) -> "SegmentedShape":
        return cls(np.full(n, float(kappa)), float(total_length))


def normalize_angle(angle: float) -> float:
    """Wrap ``angle`` into ``(-pi, pi]``."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def _arc_terms(kappa: float, s: float) -> tuple[float, float]:
    """Return ``((cos(ks) - 1)/k, sin(ks)/k)`` without cancellation near ``k = 0``."""
    u = kappa * s
    if abs(u) < SERIES_THRESHOLD:
        lateral = -0.5 * kappa * s * s * (1.0 - u * u / 12.0)
        axial = s * (1.0 - u * u / 6.0)
        return lateral, axial
    # cos(u) - 1 = -2 sin^2(u/2) avoids cancellation just above the threshold
    return -2.0 * math.sin(0.5 * u) ** 2 / kappa, math.sin(u) / kappa


def _check_finite(q: Configuration) -> None:
    if not (math.isfinite(q.s) and math.isfinite(q.kappa) and math.isfinite(q.phi)):
        raise InvalidInputError(f"non-finite configuration {q!r}")
    if q.s <= 0:
        raise InvalidInputError(f"arc length must be positive, got {q.s}")


def tip_transform(q: Configuration) -> np.ndarray:
    """Homogeneous base-to-tip transform of the constant-curvature arc.

    Parameters
    ----------
    q : Configuration
        Arc with ``q.s > 0``.

    Returns
    -------
    numpy.ndarray
        4x4 matrix; rotation block is orthonormal, translation column is the
        tip position returned by :func:`tip_position`.
    """
    _check_finite(q)
    cp, sp = math.cos(q.phi), math.sin(q.phi)
    u = q.kappa * q.s
    cu, su = math.cos(u), math.sin(u)
    lateral, axial = _arc_terms(q.kappa, q.s)
    return np.array(
        [
            [cp * cp * (cu - 1.0) + 1.0, sp * cp * (cu - 1.0), -cp * su, cp * lateral],
            [sp * cp * (cu - 1.0), cp * cp * (1.0 - cu) + cu, -sp * su, sp * lateral],
            [cp * su, sp * su, cu, axial],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def tip_position(q: Configuration) -> tuple[float, float, float]:
    """Cartesian tip position ``(x, y, z)`` of the arc."""
    _check_finite(q)
    lateral, axial = _arc_terms(q.kappa, q.s)
    return (math.cos(q.phi) * lateral, math.sin(q.phi) * lateral, axial)


def planar_tip(q: Configuration) -> PlanarPoint:
    """Tip in the planar workspace, i.e. the (x, z) components for ``phi = 0``."""
    if q.phi != 0.0:
        raise UnsupportedConfigurationError(f"planar_tip requires phi == 0, got {q.phi}")
    _check_finite(q)
    lateral, axial = _arc_terms(q.kappa, q.s)
    return PlanarPoint(lateral, axial)


def arc_chord(kappas: np.ndarray, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized local chord ``((cos(kl) - 1)/k, sin(kl)/k)`` of arcs of length ``length``."""
    kappas = np.asarray(kappas, dtype=float)
    u = kappas * length
    small = np.abs(u) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, kappas)
    with np.errstate(invalid="ignore", divide="ignore"):
        lateral = np.where(small, -0.5 * kappas * length**2 * (1.0 - u * u / 12.0), -2.0 * np.sin(0.5 * u) ** 2 / safe)
        axial = np.where(small, length * (1.0 - u * u / 6.0), np.sin(u) / safe)
    return lateral, axial


def chain_positions(
    kappas: np.ndarray,
    total_length: float,
    base: PlanarPose | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Positions and headings of a chain of equal-length constant-curvature arcs.

    Returns an ``(N + 1, 2)`` array of points (base first) and the ``N + 1``
    unwrapped headings. ``kappas`` may carry leading batch dimensions, in which
    case the outputs gain the same leading dimensions.
    """
    kappas = np.asarray(kappas, dtype=float)
    n = kappas.shape[-1]
    if n < 1:
        raise InvalidInputError("chain needs at least one sub-segment")
    if base is None:
        bx, by, h0 = 0.0, 0.0, 0.0
    else:
        (bx, by), h0 = base
    ell = total_length / n
    lateral, axial = arc_chord(kappas, ell)
    headings = h0 + ell * np.concatenate(
        [np.zeros(kappas.shape[:-1] + (1,)), np.cumsum(kappas, axis=-1)], axis=-1
    )
    c, s = np.cos(headings[..., :-1]), np.sin(headings[..., :-1])
    dx = c * lateral - s * axial
    dy = s * lateral + c * axial
    xs = bx + np.concatenate([np.zeros(kappas.shape[:-1] + (1,)), np.cumsum(dx, axis=-1)], axis=-1)
    ys = by + np.concatenate([np.zeros(kappas.shape[:-1] + (1,)), np.cumsum(dy, axis=-1)], axis=-1)
    return np.stack([xs, ys], axis=-1), headings


def chain_poses(shape: SegmentedShape, base: PlanarPose | None = None) -> list[PlanarPose]:
    """Poses at the base and at every sub-segment tip (``N + 1`` entries)."""
    if base is None:
        base = PlanarPose(PlanarPoint(0.0, 0.0), 0.0)
    if not all(math.isfinite(v) for v in (*base.position, base.heading)):
        raise InvalidInputError(f"non-finite base pose {base!r}")
    points, headings = chain_positions(shape.kappas, shape.total_length, base)
    poses = [PlanarPose(PlanarPoint(float(p[0]), float(p[1])), normalize_angle(float(h)))
             for p, h in zip(points[1:], headings[1:])]
    return [base, *poses]
