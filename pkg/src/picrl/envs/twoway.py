"""Two-lane road with slow same-direction traffic and oncoming traffic.

The ego car drives in the right lane (0) and may overtake through the left lane
(1), which carries oncoming vehicles. Positions are integer cells relative to the
ego car, which always sits at cell 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from picrl.envs.base import Env, EpisodeOverError

KEEP, LEFT, RIGHT, ACCEL, DECEL = range(5)
ACTION_NAMES = ("keep", "left", "right", "accel", "decel")
RIGHT_LANE, LEFT_LANE = 0, 1
SLOT_FEATURES = 4


@dataclass(frozen=True)
class TwoWayMiniConfig:
    view_length: int = 30
    back_limit: int = -6
    min_speed: int = 1
    max_speed: int = 3
    slow_speed: int = 1
    oncoming_speed: int = -2
    slow_spawn_rate: float = 0.08
    oncoming_spawn_rate: float = 0.08
    min_spawn_gap: int = 5
    overtake_window: int = 3
    high_velocity_reward: float = 0.8
    left_lane_reward: float = 0.2
    collision_reward: float = 0.0
    left_lane_constraint: float = 1.0
    left_lane_budget_unit: int = 25
    episode_length: int = 100
    k_nearest: int = 4

    def __post_init__(self):
        for name in ("slow_spawn_rate", "oncoming_spawn_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 1 <= self.min_speed <= self.max_speed:
            raise ValueError("need 1 <= min_speed <= max_speed")

    @property
    def left_lane_budget(self) -> int:
        return int(round(self.left_lane_constraint * self.left_lane_budget_unit))

    @classmethod
    def preset(cls, complexity: str = "simple", **overrides) -> "TwoWayMiniConfig":
        base = cls(**overrides)
        if complexity == "simple":
            return base
        if complexity == "complex":
            return replace(base, slow_spawn_rate=min(1.0, 2 * base.slow_spawn_rate),
                           oncoming_spawn_rate=min(1.0, 2 * base.oncoming_spawn_rate))
        raise ValueError(f"unknown complexity {complexity!r}")


@dataclass(frozen=True)
class Vehicle:
    pos: int
    lane: int
    speed: int


@dataclass(frozen=True)
class TwoWayState:
    lane: int = RIGHT_LANE
    speed: int = 2
    vehicles: tuple = field(default_factory=tuple)
    left_used: int = 0
    t: int = 0
    done: bool = False
    collided: bool = False


def _lane_speed(config: TwoWayMiniConfig, lane: int) -> int:
    return config.slow_speed if lane == RIGHT_LANE else config.oncoming_speed


def _spawn(config: TwoWayMiniConfig, vehicles: list, rng) -> list:
    out = list(vehicles)
    for lane, rate in ((RIGHT_LANE, config.slow_spawn_rate), (LEFT_LANE, config.oncoming_spawn_rate)):
        if rng.random() < rate:
            near = any(v.lane == lane and v.pos >= config.view_length - config.min_spawn_gap for v in out)
            if not near:
                out.append(Vehicle(config.view_length, lane, _lane_speed(config, lane)))
    return out


def twoway_initial_state(config: TwoWayMiniConfig, rng) -> TwoWayState:
    vehicles = []
    for lane, rate in ((RIGHT_LANE, config.slow_spawn_rate), (LEFT_LANE, config.oncoming_spawn_rate)):
        for pos in range(8, config.view_length + 1, config.min_spawn_gap + 1):
            if rng.random() < rate * 3:
                vehicles.append(Vehicle(pos, lane, _lane_speed(config, lane)))
    return TwoWayState(vehicles=tuple(vehicles))


def twoway_step(config: TwoWayMiniConfig, state: TwoWayState, action: int, rng):
    """Advance one decision step; returns ``(state, reward, terminal)``.

    Lane changes past the road edge and speed changes past the limits are no-ops.
    A collision (a vehicle in the ego lane crossing or reaching cell 0) ends the
    episode with the collision reward.
    """
    if state.done:
        raise EpisodeOverError("step after terminal")
    lane, speed = state.lane, state.speed
    if action == LEFT:
        lane = LEFT_LANE
    elif action == RIGHT:
        lane = RIGHT_LANE
    elif action == ACCEL:
        speed = min(config.max_speed, speed + 1)
    elif action == DECEL:
        speed = max(config.min_speed, speed - 1)

    moved, collided = [], False
    for v in state.vehicles:
        new_pos = v.pos + v.speed - speed
        if v.lane == lane and min(v.pos, new_pos) <= 0 <= max(v.pos, new_pos):
            collided = True
        moved.append(Vehicle(new_pos, v.lane, v.speed))

    t = state.t + 1
    if collided:
        nxt = TwoWayState(lane, speed, tuple(moved), state.left_used, t, True, True)
        return nxt, config.collision_reward, True

    reward = config.high_velocity_reward * (speed - config.min_speed) / max(1, config.max_speed - config.min_speed)
    left_used = state.left_used
    if lane == LEFT_LANE:
        overtaking = any(v.lane == RIGHT_LANE and abs(v.pos) <= config.overtake_window for v in moved)
        if overtaking and left_used < config.left_lane_budget:
            reward += config.left_lane_reward
        left_used += 1

    kept = [v for v in moved if config.back_limit <= v.pos <= config.view_length]
    kept = _spawn(config, kept, rng)
    done = t >= config.episode_length
    return TwoWayState(lane, speed, tuple(kept), left_used, t, done, False), reward, done


def state_vector(config: TwoWayMiniConfig, state: TwoWayState) -> np.ndarray:
    """Ego features followed by the K nearest vehicles, zero-padded.

    Ego: lane, normalised speed, remaining left-lane budget fraction. Each vehicle
    slot: present flag, position / view, lane, speed / max_speed.
    """
    budget = config.left_lane_budget
    ego = [float(state.lane),
           (state.speed - config.min_speed) / max(1, config.max_speed - config.min_speed),
           (budget - min(state.left_used, budget)) / budget if budget > 0 else 0.0]
    near = sorted(state.vehicles, key=lambda v: (abs(v.pos), v.lane, v.pos))[: config.k_nearest]
    slots = np.zeros((config.k_nearest, SLOT_FEATURES))
    for i, v in enumerate(near):
        slots[i] = (1.0, v.pos / config.view_length, float(v.lane), v.speed / config.max_speed)
    return np.concatenate([ego, slots.ravel()])


class TwoWayMini(Env):
    """Overtaking task; actions are keep, left, right, accel, decel."""

    n_actions = 5

    def __init__(self, config: TwoWayMiniConfig = None):
        super().__init__()
        self.config = config or TwoWayMiniConfig()
        self.state_dim = 3 + SLOT_FEATURES * self.config.k_nearest
        self.max_steps = self.config.episode_length
        self.state = None

    def _reset(self):
        self.state = twoway_initial_state(self.config, self.rng)
        return state_vector(self.config, self.state)

    def _step(self, action):
        self.state, reward, terminal = twoway_step(self.config, self.state, action, self.rng)
        return state_vector(self.config, self.state), reward, self.state.collided
