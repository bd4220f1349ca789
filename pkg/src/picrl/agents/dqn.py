"""Vanilla DQN: experience replay, a hard-copied target network, epsilon-greedy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from picrl.agents.base import BaseAgent
from picrl.agents.losses import dqn_loss
from picrl.nn import hard_update
from picrl.utils.validation import check_rng


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    floor: float = 0.1
    decay_per_update: float = 5e-6

    def __call__(self, updates: int) -> float:
        return max(self.floor, self.start - self.decay_per_update * updates)


class DQN(BaseAgent):
    """Q network ``q`` with target ``q_target`` copied every ``target_interval`` updates.

    Exploration is epsilon-greedy with epsilon decaying per update; evaluation
    and :meth:`predict_proba` are greedy.
    """

    def __init__(self, hidden=(64, 64), gamma=0.99, lr=3e-4, batch_size=64, buffer_size=200_000,
                 update_every=2, target_interval=10_000, eps_start=1.0, eps_floor=0.1, eps_decay=5e-6,
                 total_steps=100_000, seed=None):
        self.hidden = hidden
        self.gamma = gamma
        self.lr = lr
        self.batch_size = batch_size
        self.buffer_size = buffer_size
        self.update_every = update_every
        self.target_interval = target_interval
        self.eps_start = eps_start
        self.eps_floor = eps_floor
        self.eps_decay = eps_decay
        self.total_steps = total_steps
        self.seed = seed

    @property
    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_floor, self.eps_decay)

    def current_epsilon(self) -> float:
        return self.schedule(getattr(self, "updates_", 0))

    def _build_networks(self):
        self._make_net("q", self.state_dim_, self.n_actions_, "none")
        self._make_target("q_target", "q")
        self._make_opt("q", self.lr)

    def _action_probs(self, states, prev):
        q = self.nets_["q"](states)
        probs = np.zeros_like(q)
        probs[np.arange(len(q)), np.argmax(q, axis=1)] = 1.0
        return probs, np.full(len(states), np.nan)

    def act_with_info(self, state, prev_action=None, rng=None, mode="sample", training=False):
        if not training:
            return super().act_with_info(state, prev_action, rng, "greedy")
        rng = self.act_rng_ if rng is None else check_rng(rng)
        if rng.random() < self.current_epsilon():
            return int(rng.integers(self.n_actions_)), float("nan")
        return super().act_with_info(state, prev_action, rng, "greedy")

    def _update(self, step):
        if step % self.update_every != 0:
            return None
        n = self.nets_
        res = dqn_loss(n["q"], n["q_target"], self.sample_batch(), self.gamma)
        self.opts_["q"].step(res.grads["q"])
        if (self.updates_ + 1) % self.target_interval == 0:
            hard_update(n["q_target"], n["q"])
        return {"loss_core_q": res.value}
