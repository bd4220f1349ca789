"""Discrete-action soft actor-critic with twin critics."""

from __future__ import annotations

import numpy as np

from picrl.agents.base import BaseAgent
from picrl.agents.losses import core_actor_loss, core_critic_loss
from picrl.nn import soft_update


class DiscreteSAC(BaseAgent):
    """Softmax actor, twin Q critics and Polyak-averaged targets at a fixed temperature.

    Networks: ``actor``, ``q1``, ``q2``, ``q1_target``, ``q2_target``. Updates fire
    every ``update_every_core`` stored transitions.
    """

    def __init__(self, hidden=(64, 64), gamma=0.99, alpha_core=0.1, lr_critic=3e-4, lr_actor=3e-4,
                 sigma_core=0.002, batch_size=64, buffer_size=200_000, update_every_core=2,
                 total_steps=100_000, seed=None):
        self.hidden = hidden
        self.gamma = gamma
        self.alpha_core = alpha_core
        self.lr_critic = lr_critic
        self.lr_actor = lr_actor
        self.sigma_core = sigma_core
        self.batch_size = batch_size
        self.buffer_size = buffer_size
        self.update_every_core = update_every_core
        self.total_steps = total_steps
        self.seed = seed

    def _build_core(self):
        S, A = self.state_dim_, self.n_actions_
        self._make_net("actor", S, A, "softmax")
        for q in ("q1", "q2"):
            self._make_net(q, S, A, "none")
            self._make_target(f"{q}_target", q)
            self._make_opt(q, self.lr_critic)
        self._make_opt("actor", self.lr_actor)

    def _build_networks(self):
        self._build_core()

    def _action_probs(self, states, prev):
        probs = self.nets_["actor"](states)
        return probs, np.full(len(states), np.nan)

    def _inner_update(self, batch) -> dict:
        n = self.nets_
        critics = (n["q1"], n["q2"])
        res_q = core_critic_loss(critics, (n["q1_target"], n["q2_target"]), n["actor"], batch,
                                 self.gamma, self.alpha_core)
        for name in ("q1", "q2"):
            self.opts_[name].step(res_q.grads[name])
        res_pi = core_actor_loss(n["actor"], critics, batch, self.alpha_core)
        self.opts_["actor"].step(res_pi.grads["actor"])
        soft_update(n["q1_target"], n["q1"], self.sigma_core)
        soft_update(n["q2_target"], n["q2"], self.sigma_core)
        return {"loss_core_q": res_q.value, "loss_core_pi": res_pi.value}

    def _update(self, step):
        if step % self.update_every_core != 0:
            return None
        return self._inner_update(self.sample_batch())
