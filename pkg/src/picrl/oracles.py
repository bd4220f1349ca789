"""Independent reference computations used to cross-check the main routines.

Each oracle takes a different route to the same quantity: a dense linear solve
instead of fixed-point sweeps, soft value iteration instead of policy
iteration, plain Monte Carlo instead of dynamic programming, and central finite
differences instead of backpropagation.
"""

from __future__ import annotations

import numpy as np

from picrl.mdp import LOG_FLOOR, MdpSpec, _as_augmented, sample_episodes
from picrl.utils.validation import check_rng


def soft_values_by_solve(spec: MdpSpec, policy, alpha: float = 0.0) -> np.ndarray:
    """Soft state values ``V[s, prev]`` from one dense linear solve.

    Unknowns are indexed by (state, previous action) including the null slot.
    """
    pol = _as_augmented(spec, policy).probs
    S, A = spec.n_states, spec.n_actions
    n = S * (A + 1)
    move = np.zeros((S, A + 1, S, A + 1))
    move[:, :, :, :A] = np.einsum("spa,sak->spka", pol, spec.transition)
    ent = -np.sum(pol * np.log(np.maximum(pol, LOG_FLOOR)), axis=-1)
    rhs = np.einsum("spa,sa->sp", pol, spec.reward) + alpha * ent
    v = np.linalg.solve(np.eye(n) - spec.gamma * move.reshape(n, n), rhs.reshape(n))
    return v.reshape(S, A + 1)


def soft_return_by_solve(spec: MdpSpec, policy, alpha: float = 0.0) -> float:
    return float(spec.rho0 @ soft_values_by_solve(spec, policy, alpha)[:, spec.null_action])


def soft_value_iteration(spec: MdpSpec, alpha: float, tol: float = 1e-12, max_iter: int = 200_000):
    """Optimal soft Q by iterating ``Q <- r + gamma P (alpha logsumexp(Q / alpha))``.

    With ``alpha = 0`` the hard max is used. Returns ``(q, policy_probs)``.
    """
    R, P, g = spec.reward, spec.transition, spec.gamma
    q = np.zeros_like(R)
    for _ in range(max_iter):
        if alpha > 0:
            top = q.max(axis=1)
            v = top + alpha * np.log(np.sum(np.exp((q - top[:, None]) / alpha), axis=1))
        else:
            v = q.max(axis=1)
        q_next = R + g * P @ v
        done = np.max(np.abs(q_next - q)) < tol
        q = q_next
        if done:
            break
    else:
        raise RuntimeError("soft value iteration did not converge")
    if alpha > 0:
        z = (q - q.max(axis=1, keepdims=True)) / alpha
        probs = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    else:
        probs = np.zeros_like(q)
        probs[np.arange(len(q)), np.argmax(q, axis=1)] = 1.0
    return q, probs


def monte_carlo_return(spec: MdpSpec, policy, n_episodes: int, rng=None, n_steps: int = None):
    """Mean and standard error of the discounted return over sampled episodes."""
    rng = check_rng(rng)
    _, _, rewards = sample_episodes(spec, policy, n_episodes, rng, n_steps)
    disc = rewards @ (spec.gamma ** np.arange(rewards.shape[1]))
    return float(disc.mean()), float(disc.std(ddof=1) / np.sqrt(len(disc)))


def monte_carlo_oscillation(spec: MdpSpec, policy, n_episodes: int, rng=None, n_steps: int = None):
    """Mean per-episode switch fraction and its standard error."""
    rng = check_rng(rng)
    _, actions, _ = sample_episodes(spec, policy, n_episodes, rng, n_steps)
    ratios = np.mean(actions[:, 1:] != actions[:, :-1], axis=1)
    return float(ratios.mean()), float(ratios.std(ddof=1) / np.sqrt(len(ratios)))


def finite_difference_grads(loss_fn, params, h: float = 1e-5) -> list:
    """Central differences of ``loss_fn()`` with respect to every entry of ``params``.

    ``params`` are perturbed in place and restored exactly.
    """
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = loss_fn()
            p[idx] = orig - h
            down = loss_fn()
            p[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        out.append(g)
    return out


def relative_error(analytic, numeric) -> float:
    """``||a - n|| / max(||a||, ||n||)`` per tensor, maximised over tensors."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(np.linalg.norm(a), np.linalg.norm(n))
        if scale == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(a - n) / scale))
    return worst
