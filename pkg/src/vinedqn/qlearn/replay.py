"""Bounded FIFO replay memory backed by preallocated arrays."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = ["Transition", "Batch", "MemoryNotReady", "ReplayMemory"]


class MemoryNotReady(RuntimeError):
    """Raised when a minibatch is requested from an undersized memory."""


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayMemory:
    """Ring buffer of transitions; once full, each push overwrites the oldest.

    ``counter`` counts every push ever made; ``seq`` keeps the push number
    of each stored slot so eviction order can be inspected.
    """

    def __init__(self, capacity: int, obs_size: int = 9, n_actions: int = 6):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.n_actions = n_actions
        self.states = np.zeros((self.capacity, obs_size))
        self.next_states = np.zeros((self.capacity, obs_size))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.seq = np.full(self.capacity, -1, dtype=np.int64)
        self.counter = 0

    def __len__(self) -> int:
        return min(self.counter, self.capacity)

    def push(self, t: Transition) -> None:
        if not 0 <= int(t.action) < self.n_actions:
            raise ValueError(f"action index {t.action} out of range")
        i = self.counter % self.capacity
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = t.done
        self.seq[i] = self.counter
        self.counter += 1

    def _order(self) -> np.ndarray:
        n = len(self)
        if self.counter <= self.capacity:
            return np.arange(n)
        start = self.counter % self.capacity
        return (start + np.arange(n)) % self.capacity

    def __iter__(self):
        """Stored transitions, oldest first."""
        for i in self._order():
            yield Transition(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                             self.next_states[i].copy(), bool(self.dones[i]))

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform minibatch, without replacement inside the batch."""
        n = len(self)
        if n < batch_size:
            raise MemoryNotReady(f"memory holds {n} transitions, need {batch_size}")
        idx = rng.choice(n, size=batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])
