"""Deep Q-network agent, replay memory, training and evaluation."""

from .evaluation import EvalResult, GridSpec, Heatmap, LatticePlanner, evaluate, heatmap, rollout
from .network import QNetwork
from .replay import MemoryNotReady, ReplayMemory, Transition
from .training import (
    DQNAgent,
    Hyperparameters,
    TrainMetrics,
    epsilon_at,
    select_action,
    td_target,
    train,
    train_step,
)
