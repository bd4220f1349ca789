"""Uniform ring-buffer replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    states: np.ndarray
    prev_actions: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


class ReplayBuffer:
    """Fixed-capacity buffer of ``(s, a_prev, a, r, s', terminal)`` transitions.

    ``prev_actions`` stores the null previous action as ``n_actions``.
    """

    FIELDS = ("states", "prev_actions", "actions", "rewards", "next_states", "terminals")

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.prev_actions = np.zeros(capacity, dtype=np.int64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def add(self, state, prev_action: int, action: int, reward: float, next_state, terminal: bool):
        i = self.cursor
        self.states[i] = state
        self.prev_actions[i] = prev_action
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminals[i] = float(terminal)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(*(getattr(self, f)[idx] for f in self.FIELDS))

    def state_dict(self) -> dict:
        d = {f: getattr(self, f)[: self.size].copy() for f in self.FIELDS}
        d.update(capacity=self.capacity, cursor=self.cursor, size=self.size, state_dim=self.state_dim)
        return d

    @classmethod
    def from_state_dict(cls, d) -> "ReplayBuffer":
        buf = cls(int(d["capacity"]), int(d["state_dim"]))
        n = int(d["size"])
        for f in cls.FIELDS:
            getattr(buf, f)[:n] = d[f]
        buf.size, buf.cursor = n, int(d["cursor"])
        return buf
