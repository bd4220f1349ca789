"""Loss functions with hand-derived gradients.

Every loss returns a :class:`LossResult` whose ``grads`` dict holds parameter
gradients only for the networks that loss trains. Targets, frozen networks and
bootstrap values are constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from picrl.mdp import LOG_FLOOR


@dataclass
class LossResult:
    value: float
    grads: dict
    info: dict = field(default_factory=dict)


def one_hot_prev(prev_actions, n_actions: int) -> np.ndarray:
    """One-hot codes for previous actions; the null index ``n_actions`` maps to zeros."""
    prev = np.asarray(prev_actions, dtype=np.int64).reshape(-1)
    out = np.zeros((len(prev), n_actions))
    valid = prev < n_actions
    out[np.flatnonzero(valid), prev[valid]] = 1.0
    return out


def augment(states, prev_actions, n_actions: int) -> np.ndarray:
    return np.concatenate([np.atleast_2d(states), one_hot_prev(prev_actions, n_actions)], axis=1)


def _floored_log(p):
    return np.log(np.maximum(p, LOG_FLOOR))


def _entropy_term_grad(p, alpha):
    """d/dp of ``alpha * p * log max(p, floor)``."""
    return alpha * (_floored_log(p) + (p > LOG_FLOOR))


def soft_value(probs, q, alpha: float) -> np.ndarray:
    """Row-wise ``sum_a p_a (q_a - alpha log p_a)``."""
    return np.sum(probs * (q - alpha * _floored_log(probs)), axis=1)


def _check_finite(value, name):
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite {name} loss")
    return float(value)


def pic_weights(pic, states, prev_actions, n_actions: int, mu0: float = 0.0, mu_clamp=None):
    """PIC weights per row plus the forward cache; null rows get weight 0.

    The PIC network ends in tanh; its output is mapped to [0, 1] and then onto
    [mu0, 1]. ``mu_clamp`` overrides the network with a constant.
    """
    prev = np.asarray(prev_actions, dtype=np.int64).reshape(-1)
    valid = prev < n_actions
    if mu_clamp is not None:
        mu = np.where(valid, float(mu_clamp), 0.0)
        return mu, None
    out, cache = pic.forward(augment(states, prev, n_actions))
    mu = mu0 + (1.0 - mu0) * (out[:, 0] + 1.0) / 2.0
    return np.where(valid, np.minimum(mu, 1.0), 0.0), cache


def mix_rows(core, prev_actions, mu):
    """Mixed distributions ``mu onehot(prev) + (1 - mu) core`` row by row."""
    n_actions = core.shape[1]
    mixed = (1.0 - mu)[:, None] * core
    return mixed + mu[:, None] * one_hot_prev(prev_actions, n_actions)


def _td_grad(q_out, actions, err, batch_size):
    g = np.zeros_like(q_out)
    g[np.arange(batch_size), actions] = err / batch_size
    return g


def core_critic_loss(critics, targets, actor, batch, gamma: float, alpha: float) -> LossResult:
    """Twin soft Bellman residual for the state-conditioned core critics."""
    B = len(batch)
    p_next = actor(batch.next_states)
    q_next = np.minimum(targets[0](batch.next_states), targets[1](batch.next_states))
    y = batch.rewards + gamma * (1.0 - batch.terminals) * soft_value(p_next, q_next, alpha)
    total, grads, idx = 0.0, {}, np.arange(B)
    for i, net in enumerate(critics):
        q, cache = net.forward(batch.states)
        err = q[idx, batch.actions] - y
        total += 0.5 * np.mean(err ** 2)
        grads[f"q{i + 1}"] = net.backward(cache, _td_grad(q, batch.actions, err, B))[0]
    return LossResult(_check_finite(total, "core critic"), grads, {"target": y})


def core_actor_loss(actor, critics, batch, alpha: float) -> LossResult:
    """Expected ``alpha log pi - min Q`` under the core policy."""
    B = len(batch)
    p, cache = actor.forward(batch.states)
    q = np.minimum(critics[0](batch.states), critics[1](batch.states))
    value = np.mean(np.sum(p * (alpha * _floored_log(p) - q), axis=1))
    g = (_entropy_term_grad(p, alpha) - q) / B
    return LossResult(_check_finite(value, "core actor"), {"actor": actor.backward(cache, g)[0]})


def mix_critic_loss(critics, targets, actor, pic, batch, gamma: float, alpha: float, n_actions: int,
                    mu0: float = 0.0, mu_clamp=None) -> LossResult:
    """Twin soft Bellman residual for the critics of the mixed policy.

    The bootstrap at ``s'`` conditions on the action just taken as the new
    previous action.
    """
    B = len(batch)
    core_next = actor(batch.next_states)
    mu_next, _ = pic_weights(pic, batch.next_states, batch.actions, n_actions, mu0, mu_clamp)
    mixed_next = mix_rows(core_next, batch.actions, mu_next)
    x_next = augment(batch.next_states, batch.actions, n_actions)
    q_next = np.minimum(targets[0](x_next), targets[1](x_next))
    y = batch.rewards + gamma * (1.0 - batch.terminals) * soft_value(mixed_next, q_next, alpha)
    x = augment(batch.states, batch.prev_actions, n_actions)
    total, grads, idx = 0.0, {}, np.arange(B)
    for i, net in enumerate(critics):
        q, cache = net.forward(x)
        err = q[idx, batch.actions] - y
        total += 0.5 * np.mean(err ** 2)
        grads[f"mq{i + 1}"] = net.backward(cache, _td_grad(q, batch.actions, err, B))[0]
    return LossResult(_check_finite(total, "mixed critic"), grads, {"target": y})


def pic_loss(pic, actor, critics, batch, alpha: float, n_actions: int, mu0: float = 0.0) -> LossResult:
    """Mixed-policy improvement objective with the core policy held fixed.

    Only the PIC network receives a gradient; rows with a null previous action
    contribute a constant.
    """
    B = len(batch)
    core = actor(batch.states)
    mu, cache = pic_weights(pic, batch.states, batch.prev_actions, n_actions, mu0)
    mixed = mix_rows(core, batch.prev_actions, mu)
    x = augment(batch.states, batch.prev_actions, n_actions)
    q = np.minimum(critics[0](x), critics[1](x))
    value = np.mean(np.sum(mixed * (alpha * _floored_log(mixed) - q), axis=1))
    g_mixed = (_entropy_term_grad(mixed, alpha) - q) / B
    onehot = one_hot_prev(batch.prev_actions, n_actions)
    g_mu = np.sum(g_mixed * (onehot - core), axis=1)
    valid = np.asarray(batch.prev_actions) < n_actions
    # mu = mu0 + (1 - mu0) (h + 1) / 2 with h the tanh output; clipped rows are flat
    raw_mu = mu0 + (1.0 - mu0) * (cache["outputs"][-1][:, 0] + 1.0) / 2.0
    g_h = np.where(valid & (raw_mu <= 1.0), g_mu * (1.0 - mu0) / 2.0, 0.0)
    grads = {"pic": pic.backward(cache, g_h[:, None])[0]}
    return LossResult(_check_finite(value, "pic"), grads, {"mu": mu})


def dqn_loss(qnet, target, batch, gamma: float) -> LossResult:
    """One-step TD loss against the max of a target network."""
    B = len(batch)
    y = batch.rewards + gamma * (1.0 - batch.terminals) * target(batch.next_states).max(axis=1)
    q, cache = qnet.forward(batch.states)
    err = q[np.arange(B), batch.actions] - y
    value = 0.5 * np.mean(err ** 2)
    g = qnet.backward(cache, _td_grad(q, batch.actions, err, B))[0]
    return LossResult(_check_finite(value, "dqn"), {"q": g}, {"target": y})
