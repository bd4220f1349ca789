"""Nested soft actor-critic: a SAC core plus a policy inertia controller."""

from __future__ import annotations

import numpy as np

from picrl.agents.losses import mix_critic_loss, mix_rows, pic_loss, pic_weights
from picrl.agents.sac import DiscreteSAC
from picrl.nn import soft_update
from picrl.utils.validation import check_unit_interval


class NSAC(DiscreteSAC):
    """SAC core trained as usual (inner loop) while a PIC network and twin mixed
    critics learn the inertia weight (outer loop).

    The acting policy is ``mu(s, a_prev) onehot(a_prev) + (1 - mu) pi_core(s)``
    with ``mu`` mapped onto ``[mu0, 1]``. ``mu_clamp`` fixes the weight to a
    constant and ``outer_updates=False`` freezes the outer loop; together with
    ``mu_clamp=0`` the agent behaves exactly like :class:`DiscreteSAC`.
    """

    uses_pic = True

    def __init__(self, hidden=(64, 64), gamma=0.99, alpha_core=0.1, alpha_mix=0.01, lr_critic=3e-4,
                 lr_actor=3e-4, lr_mix_critic=3e-4, lr_pic=3e-4, sigma_core=0.002, sigma=0.002,
                 batch_size=64, buffer_size=200_000, update_every_core=2, update_every=2, mu0=0.0,
                 mu_clamp=None, outer_updates=True, total_steps=100_000, seed=None):
        super().__init__(hidden=hidden, gamma=gamma, alpha_core=alpha_core, lr_critic=lr_critic,
                         lr_actor=lr_actor, sigma_core=sigma_core, batch_size=batch_size,
                         buffer_size=buffer_size, update_every_core=update_every_core,
                         total_steps=total_steps, seed=seed)
        self.alpha_mix = alpha_mix
        self.lr_mix_critic = lr_mix_critic
        self.lr_pic = lr_pic
        self.sigma = sigma
        self.update_every = update_every
        self.mu0 = mu0
        self.mu_clamp = mu_clamp
        self.outer_updates = outer_updates

    def _build_networks(self):
        check_unit_interval(self.mu0, "mu0")
        if self.mu_clamp is not None:
            check_unit_interval(self.mu_clamp, "mu_clamp")
        self._build_core()
        S, A = self.state_dim_, self.n_actions_
        self._make_net("pic", S + A, 1, "tanh")
        self._make_opt("pic", self.lr_pic)
        for q in ("mq1", "mq2"):
            self._make_net(q, S + A, A, "none")
            self._make_target(f"{q}_target", q)
            self._make_opt(q, self.lr_mix_critic)

    def _action_probs(self, states, prev):
        core = self.nets_["actor"](states)
        mu, _ = pic_weights(self.nets_["pic"], states, prev, self.n_actions_, self.mu0, self.mu_clamp)
        mixed = mix_rows(core, prev, mu)
        return mixed, np.where(prev < self.n_actions_, mu, np.nan)

    def _outer_update(self, batch) -> dict:
        n, A = self.nets_, self.n_actions_
        critics = (n["mq1"], n["mq2"])
        res_q = mix_critic_loss(critics, (n["mq1_target"], n["mq2_target"]), n["actor"], n["pic"], batch,
                                self.gamma, self.alpha_mix, A, self.mu0, self.mu_clamp)
        for name in ("mq1", "mq2"):
            self.opts_[name].step(res_q.grads[name])
        record = {"loss_mix_q": res_q.value}
        if self.mu_clamp is None:
            res_pic = pic_loss(n["pic"], n["actor"], critics, batch, self.alpha_mix, A, self.mu0)
            self.opts_["pic"].step(res_pic.grads["pic"])
            record["loss_pic"] = res_pic.value
        soft_update(n["mq1_target"], n["mq1"], self.sigma)
        soft_update(n["mq2_target"], n["mq2"], self.sigma)
        return record

    def _update(self, step):
        inner = step % self.update_every_core == 0
        outer = self.outer_updates and step % self.update_every == 0
        if not (inner or outer):
            return None
        batch = self.sample_batch()
        record = {}
        if inner:
            record.update(self._inner_update(batch))
        if outer:
            record.update(self._outer_update(batch))
        return record
