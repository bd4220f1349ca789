"""Shared machinery for replay-based agents: env loop, seeding, checkpoints."""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from picrl.agents.replay import ReplayBuffer
from picrl.mdp import _draw
from picrl.nn import AdamState, DenseNet, Optimizer
from picrl.utils.validation import check_positive_int, check_rng, check_state_batch

LOSS_KEYS = ("loss_core_q", "loss_core_pi", "loss_mix_q", "loss_pic")


def derive_seed(seed, name: str) -> int:
    """Stable per-component seed; equal (seed, name) pairs give equal streams."""
    entropy = [0 if seed is None else int(seed), zlib.crc32(name.encode())]
    if seed is None:
        entropy[0] = int(np.random.SeedSequence().entropy % (2 ** 63))
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


class BaseAgent(BaseEstimator):
    """Off-policy agent trained on a single environment.

    Subclasses provide ``_build_networks``, ``_action_probs`` and ``_update``.
    Counters: ``env_steps_`` counts base-environment steps (a repeated macro
    action counts k), ``transitions_`` counts stored transitions and drives the
    update schedule, ``updates_`` counts scheduled train steps that ran.
    """

    uses_pic = False

    # -- construction --------------------------------------------------------
    def _init_state(self, state_dim: int, n_actions: int):
        check_positive_int(self.batch_size, "batch_size")
        check_positive_int(self.buffer_size, "buffer_size")
        self.state_dim_ = int(state_dim)
        self.n_actions_ = int(n_actions)
        self.nets_: dict[str, DenseNet] = {}
        self.opts_: dict[str, Optimizer] = {}
        self._build_networks()
        self.buffer_ = ReplayBuffer(self.buffer_size, self.state_dim_)
        self.act_rng_ = check_rng(derive_seed(self.seed, "act"))
        self.replay_rng_ = check_rng(derive_seed(self.seed, "replay"))
        self.env_steps_ = 0
        self.transitions_ = 0
        self.updates_ = 0
        self.episodes_ = 0
        self.last_losses_ = {}
        self._obs = None
        self._prev = None
        self._env_seed = None
        return self

    def _make_net(self, name: str, in_dim: int, out_dim: int, out_activation: str) -> DenseNet:
        sizes = [in_dim, *self.hidden, out_dim]
        acts = ["relu"] * len(self.hidden) + [out_activation]
        net = DenseNet(sizes, acts, seed=derive_seed(self.seed, name))
        self.nets_[name] = net
        return net

    def _make_target(self, name: str, online: str) -> DenseNet:
        self.nets_[name] = self.nets_[online].copy()
        return self.nets_[name]

    def _make_opt(self, name: str, lr: float):
        self.opts_[name] = Optimizer(self.nets_[name], lr)

    def _check_is_initialized(self):
        if not hasattr(self, "nets_"):
            raise RuntimeError(f"{type(self).__name__} is not initialized; call fit() or initialize()")

    def initialize(self, env_or_state_dim, n_actions: int = None, env_seed=None):
        """Build networks and buffers without interacting with an environment.

        ``env_seed`` seeds the first training episode's reset.
        """
        if n_actions is None:
            env = env_or_state_dim
            self._init_state(env.state_dim, env.n_actions)
        else:
            self._init_state(env_or_state_dim, n_actions)
        self._env_seed = derive_seed(self.seed, "env") if env_seed is None else env_seed
        return self

    # -- acting --------------------------------------------------------------
    def _null(self) -> int:
        return self.n_actions_

    def _prev_array(self, prev_actions, n):
        if prev_actions is None:
            return np.full(n, self._null(), dtype=np.int64)
        prev = np.array([self._null() if p is None else int(p) for p in np.atleast_1d(prev_actions)],
                        dtype=np.int64)
        if len(prev) != n:
            raise ValueError(f"got {len(prev)} previous actions for {n} states")
        if np.any(prev < 0) or np.any(prev > self._null()):
            raise ValueError("previous action out of range")
        return prev

    def policy_info(self, states, prev_actions=None):
        """Action distributions and PIC weights (NaN for agents without one)."""
        self._check_is_initialized()
        states = check_state_batch(states, self.state_dim_)
        prev = self._prev_array(prev_actions, len(states))
        return self._action_probs(states, prev)

    def predict_proba(self, states, prev_actions=None) -> np.ndarray:
        return self.policy_info(states, prev_actions)[0]

    def predict(self, states, prev_actions=None) -> np.ndarray:
        """Greedy actions; ties go to the lowest index."""
        return np.argmax(self.predict_proba(states, prev_actions), axis=1)

    def act(self, state, prev_action=None, rng=None, mode: str = "sample") -> int:
        return self.act_with_info(state, prev_action, rng, mode)[0]

    def act_with_info(self, state, prev_action=None, rng=None, mode: str = "sample", training=False):
        """Return ``(action, mu)`` for one state."""
        if mode not in ("sample", "greedy"):
            raise ValueError(f"mode must be 'sample' or 'greedy', got {mode!r}")
        probs, mu = self.policy_info(np.asarray(state, dtype=float)[None, :], [prev_action])
        if mode == "greedy":
            return int(np.argmax(probs[0])), float(mu[0])
        rng = self.act_rng_ if rng is None else check_rng(rng)
        return _draw(probs[0], rng), float(mu[0])

    # -- training ------------------------------------------------------------
    def fit(self, env, total_steps: int = None, env_seed=None):
        """Initialize from ``env`` and train for ``total_steps`` environment steps."""
        self.initialize(env, env_seed=env_seed)
        total = self.total_steps if total_steps is None else total_steps
        return self.partial_fit(env, until=total)

    def partial_fit(self, env, n_steps: int = None, until: int = None):
        """Keep training until ``env_steps_`` reaches ``until`` (or grows by ``n_steps``)."""
        if not hasattr(self, "nets_"):
            self.initialize(env)
        if until is None:
            until = self.env_steps_ + (0 if n_steps is None else int(n_steps))
        while self.env_steps_ < until:
            self.env_step(env)
        return self

    def env_step(self, env):
        """Play one transition with the behaviour policy, store it and run due updates."""
        if self._obs is None:
            seed = self._env_seed if self.episodes_ == 0 else None
            self._obs = env.reset(seed=seed)
            self._prev = None
            self.episodes_ += 1
        action, _ = self.act_with_info(self._obs, self._prev, self.act_rng_, "sample", training=True)
        next_obs, reward, terminal = env.step(action)
        bootstrap_stop = terminal and not env.timed_out
        prev_code = self._null() if self._prev is None else self._prev
        self.buffer_.add(self._obs, prev_code, action, reward, next_obs, bootstrap_stop)
        self.transitions_ += 1
        self.env_steps_ += env.last_steps
        if terminal:
            self._obs, self._prev = None, None
        else:
            self._obs, self._prev = next_obs, action
        self.train_step()

    def train_step(self, step: int = None):
        """Run the updates scheduled at transition count ``step``.

        Returns the loss record, or None when nothing fired (including while the
        buffer holds fewer than ``batch_size`` transitions).
        """
        self._check_is_initialized()
        step = self.transitions_ if step is None else int(step)
        if len(self.buffer_) < self.batch_size:
            return None
        record = self._update(step)
        if record is None:
            return None
        self.updates_ += 1
        self.last_losses_ = record
        return record

    def sample_batch(self):
        return self.buffer_.sample(self.batch_size, self.replay_rng_)

    def loss_snapshot(self) -> dict:
        out = {k: float("nan") for k in LOSS_KEYS}
        out.update(self.last_losses_)
        out["epsilon"] = self.current_epsilon()
        return out

    def current_epsilon(self) -> float:
        return float("nan")

    # -- checkpoints ---------------------------------------------------------
    def _extra_state(self) -> dict:
        return {}

    def _load_extra_state(self, data: dict):
        pass

    def get_checkpoint(self) -> dict:
        self._check_is_initialized()
        return {
            "class": type(self).__name__,
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.get_params().items()},
            "state_dim": self.state_dim_,
            "n_actions": self.n_actions_,
            "nets": {k: n.to_dict() for k, n in self.nets_.items()},
            "adam": {k: o.state.to_dict() for k, o in self.opts_.items()},
            "env_seed": self._env_seed,
            "counters": {"env_steps": self.env_steps_, "transitions": self.transitions_,
                         "updates": self.updates_, "episodes": self.episodes_},
            "rng": {"act": self.act_rng_.bit_generator.state, "replay": self.replay_rng_.bit_generator.state},
            "episode": {"obs": None if self._obs is None else self._obs.tolist(), "prev": self._prev},
            "last_losses": self.last_losses_,
            "extra": self._extra_state(),
        }

    def set_checkpoint(self, data: dict, buffer: dict = None):
        self._init_state(data["state_dim"], data["n_actions"])
        for name, nd in data["nets"].items():
            self.nets_[name] = DenseNet.from_dict(nd)
        for name, od in data["adam"].items():
            self.opts_[name] = Optimizer(self.nets_[name], self.opts_[name].lr, AdamState.from_dict(od))
        self._env_seed = data["env_seed"]
        c = data["counters"]
        self.env_steps_, self.transitions_ = c["env_steps"], c["transitions"]
        self.updates_, self.episodes_ = c["updates"], c["episodes"]
        self.act_rng_.bit_generator.state = data["rng"]["act"]
        self.replay_rng_.bit_generator.state = data["rng"]["replay"]
        ep = data["episode"]
        self._obs = None if ep["obs"] is None else np.array(ep["obs"], dtype=float)
        self._prev = ep["prev"]
        self.last_losses_ = dict(data["last_losses"])
        self._load_extra_state(data["extra"])
        if buffer is not None:
            self.buffer_ = ReplayBuffer.from_state_dict(buffer)
        return self

    def save(self, path, include_buffer: bool = True):
        """Write a JSON checkpoint plus the replay buffer as ``<path>.buffer.npz``."""
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(self.get_checkpoint(), fh)
        if include_buffer:
            np.savez_compressed(f"{path}.buffer.npz", **self.buffer_.state_dict())

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path) as fh:
            data = json.load(fh)
        params = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data["params"].items()}
        agent = cls(**params)
        buf_path = Path(f"{path}.buffer.npz")
        buffer = dict(np.load(buf_path)) if buf_path.exists() else None
        return agent.set_checkpoint(data, buffer)
