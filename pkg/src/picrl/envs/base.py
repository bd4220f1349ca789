"""Environment contract shared by the toy tasks and wrappers."""

from __future__ import annotations

import numpy as np

from picrl.utils.validation import check_rng


class EpisodeOverError(RuntimeError):
    """``step`` was called on an episode that already ended."""


class Env:
    """Minimal episodic environment.

    ``reset(seed)`` returns the first observation; ``step(action)`` returns
    ``(observation, reward, terminal)``. ``terminal`` is also True when the time
    limit is hit, in which case ``timed_out`` is set so learners can still
    bootstrap. ``last_steps`` counts base-environment steps consumed by the last
    call and ``last_executed`` the base actions actually played.
    """

    state_dim: int
    n_actions: int
    max_steps: int

    def __init__(self):
        self.rng = check_rng(None)
        self.done = True
        self.timed_out = False
        self.t = 0
        self.last_steps = 0
        self.last_executed: list = []

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = check_rng(seed)
        self.done = False
        self.timed_out = False
        self.t = 0
        return self._reset()

    def step(self, action):
        if self.done:
            raise EpisodeOverError("step() called after the episode ended; call reset()")
        action = int(action)
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} outside [0, {self.n_actions})")
        obs, reward, terminal = self._step(action)
        self.t += 1
        if not terminal and self.t >= self.max_steps:
            terminal = True
            self.timed_out = True
        self.done = terminal
        self.last_steps = 1
        self.last_executed = [action]
        return obs, float(reward), terminal

    def _reset(self):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError
