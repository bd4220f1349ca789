"""Action-repetition and action-inconsistency-penalty wrappers."""

from __future__ import annotations

from dataclasses import dataclass

from picrl.envs.base import Env, EpisodeOverError

DEFAULT_REPEATS = (1, 2, 4, 8)


@dataclass(frozen=True)
class RepetitionActionSpace:
    """Augmented actions ``A x Re`` indexed as ``base * len(repeats) + repeat_index``."""

    n_base: int
    repeats: tuple = DEFAULT_REPEATS

    def __post_init__(self):
        if self.n_base < 1 or not self.repeats or any(k < 1 for k in self.repeats):
            raise ValueError("need n_base >= 1 and positive repeat counts")

    @property
    def n_actions(self) -> int:
        return self.n_base * len(self.repeats)

    def encode(self, base: int, repeat: int) -> int:
        return base * len(self.repeats) + self.repeats.index(repeat)

    def decode(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_actions:
            raise ValueError(f"augmented action {index} outside [0, {self.n_actions})")
        base, k = divmod(index, len(self.repeats))
        return base, self.repeats[k]


class RepetitionWrapper(Env):
    """Execute ``(a, k)`` as k base steps of ``a``, stopping early at a terminal.

    The reward is ``sum_j gamma^j r_j`` over the executed base steps.
    """

    def __init__(self, env: Env, repeats=DEFAULT_REPEATS, gamma: float = 0.99):
        super().__init__()
        self.env = env
        self.space = RepetitionActionSpace(env.n_actions, tuple(repeats))
        self.gamma = gamma
        self.state_dim = env.state_dim
        self.n_actions = self.space.n_actions
        self.max_steps = env.max_steps

    def reset(self, seed=None):
        self.done = False
        self.timed_out = False
        return self.env.reset(seed)

    def step(self, action):
        if self.done:
            raise EpisodeOverError("step() called after the episode ended; call reset()")
        base, k = self.space.decode(int(action))
        total, executed = 0.0, []
        obs, terminal = None, False
        for j in range(k):
            obs, r, terminal = self.env.step(base)
            total += self.gamma ** j * r
            executed.append(base)
            if terminal:
                break
        self.last_steps = len(executed)
        self.last_executed = executed
        self.done = terminal
        self.timed_out = self.env.timed_out
        return obs, total, terminal


class InconsistencyPenaltyWrapper(Env):
    """Add ``penalty`` to the reward whenever the action differs from the previous one.

    In evaluation mode (``training = False``) rewards pass through unchanged.
    """

    def __init__(self, env: Env, penalty: float = -0.05, training: bool = True):
        super().__init__()
        self.env = env
        self.penalty = float(penalty)
        self.training = training
        self.state_dim = env.state_dim
        self.n_actions = env.n_actions
        self.max_steps = env.max_steps
        self._prev = None

    def train(self, mode: bool = True) -> "InconsistencyPenaltyWrapper":
        self.training = mode
        return self

    def eval(self) -> "InconsistencyPenaltyWrapper":
        return self.train(False)

    def reset(self, seed=None):
        self._prev = None
        self.done = False
        self.timed_out = False
        return self.env.reset(seed)

    def step(self, action):
        obs, r, terminal = self.env.step(action)
        action = int(action)
        if self.training and self._prev is not None and action != self._prev:
            r += self.penalty
        self._prev = action
        self.done = terminal
        self.timed_out = self.env.timed_out
        self.last_steps = self.env.last_steps
        self.last_executed = self.env.last_executed
        return obs, r, terminal
