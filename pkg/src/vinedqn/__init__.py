"""Planar vine-growing-robot simulation and deep Q-learning navigation."""

from .environment import Action, EnvConfig, StepResult, VineEnv, action_set, reward
from .interaction import InteractionWeights, Obstacle, SolveReport, clearance, is_colliding, objective, resolve_shape
from .kinematics import (
    Configuration,
    PlanarPoint,
    PlanarPose,
    SegmentedShape,
    chain_poses,
    planar_tip,
    tip_position,
    tip_transform,
)

__version__ = "0.1.0"
