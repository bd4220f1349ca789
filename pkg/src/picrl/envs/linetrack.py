"""One-dimensional target tracking under noisy observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from picrl.envs.base import Env, EpisodeOverError

DOWN, STAY, UP = 0, 1, 2


@dataclass(frozen=True)
class LineTrackConfig:
    track_length: int = 20
    drift_prob: float = 0.3
    noise_std: float = 0.1
    reward_scale: float = 1.0
    episode_length: int = 100

    def __post_init__(self):
        if self.track_length < 2:
            raise ValueError("track_length must be >= 2")
        if not 0.0 <= self.drift_prob <= 1.0:
            raise ValueError("drift_prob must lie in [0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class LineTrackState:
    agent: int
    target: int
    t: int = 0
    done: bool = False


def linetrack_reward(config: LineTrackConfig, agent: int, target: int) -> float:
    r = 1.0 - config.reward_scale * abs(agent - target) / config.track_length
    return float(min(1.0, max(0.0, r)))


def linetrack_step(config: LineTrackConfig, state: LineTrackState, action: int, rng):
    """Move the agent by -1/0/+1, let the target drift, score the new gap."""
    if state.done:
        raise EpisodeOverError("step after terminal")
    L = config.track_length
    agent = int(np.clip(state.agent + (action - 1), 0, L - 1))
    target = state.target
    if config.drift_prob > 0 and rng.random() < config.drift_prob:
        target = int(np.clip(target + (1 if rng.random() < 0.5 else -1), 0, L - 1))
    t = state.t + 1
    done = t >= config.episode_length
    return LineTrackState(agent, target, t, done), linetrack_reward(config, agent, target), done


def linetrack_observation(config: LineTrackConfig, state: LineTrackState, rng) -> np.ndarray:
    L = config.track_length
    obs = np.array([state.agent / L, state.target / L, (state.target - state.agent) / L])
    if config.noise_std > 0:
        obs = obs + rng.normal(0.0, config.noise_std, size=3)
    return obs


class LineTrack(Env):
    """Keep a paddle on a drifting target; actions are down, stay, up."""

    n_actions = 3
    state_dim = 3

    def __init__(self, config: LineTrackConfig = None):
        super().__init__()
        self.config = config or LineTrackConfig()
        self.max_steps = self.config.episode_length
        self.state = None

    def _reset(self):
        L = self.config.track_length
        self.state = LineTrackState(int(self.rng.integers(L)), int(self.rng.integers(L)))
        return linetrack_observation(self.config, self.state, self.rng)

    def _step(self, action):
        self.state, reward, done = linetrack_step(self.config, self.state, action, self.rng)
        return linetrack_observation(self.config, self.state, self.rng), reward, False
