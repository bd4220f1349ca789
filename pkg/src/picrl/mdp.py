"""Finite MDPs, trajectory sampling, exact soft evaluation and the oscillation metric.

Augmented tables are indexed ``[state, prev_action, action]``. The previous-action
axis has ``n_actions + 1`` slots; the last slot (``spec.null_action``) stands for
the missing action before ``t = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from picrl.exceptions import ConvergenceError, MdpValidationError, UndefinedMetricError
from picrl.utils.validation import PROB_ATOL, check_positive_int, check_rng, check_stochastic

LOG_FLOOR = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 100_000


@dataclass(frozen=True, eq=False)
class MdpSpec:
    """A finite MDP.

    ``transition`` has shape (S, A, S) and ``reward`` shape (S, A). ``horizon`` is
    the last decision index T (episodes have T + 1 actions) or None for unbounded.
    Terminal states are expressed as absorbing zero-reward states.
    """

    transition: np.ndarray
    reward: np.ndarray
    rho0: np.ndarray
    gamma: float
    horizon: Optional[int] = None

    def __post_init__(self):
        for name in ("transition", "reward", "rho0"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def null_action(self) -> int:
        return self.n_actions

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "rho0": self.rho0.tolist(),
            "gamma": self.gamma,
            "horizon": self.horizon,
        }

    def to_json(self) -> str:
        # json emits floats via repr, which round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MdpSpec":
        spec = cls(
            transition=data["transition"],
            reward=data["reward"],
            rho0=data["rho0"],
            gamma=data["gamma"],
            horizon=data.get("horizon"),
        )
        if (spec.n_states, spec.n_actions) != (data["n_states"], data["n_actions"]):
            raise MdpValidationError(
                f"declared shape ({data['n_states']}, {data['n_actions']}) does not match "
                f"transition shape {spec.transition.shape[:2]}"
            )
        return validate_mdp(spec)

    @classmethod
    def from_json(cls, text: str) -> "MdpSpec":
        return cls.from_dict(json.loads(text))


def validate_mdp(spec: MdpSpec) -> MdpSpec:
    """Return ``spec`` unchanged if every invariant holds, else raise MdpValidationError."""
    P, R = spec.transition, spec.reward
    if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
        raise MdpValidationError(f"transition must have shape (S, A, S), got {P.shape}")
    if R.shape != P.shape[:2]:
        raise MdpValidationError(f"reward shape {R.shape} != {P.shape[:2]}")
    if spec.rho0.shape != (P.shape[0],):
        raise MdpValidationError(f"rho0 shape {spec.rho0.shape} != ({P.shape[0]},)")
    check_stochastic(P, "transition")
    check_stochastic(spec.rho0, "rho0")
    if not np.all(np.isfinite(R)):
        idx = [int(i) for i in np.argwhere(~np.isfinite(R))[0]]
        raise MdpValidationError(f"reward{idx} is not finite")
    if not (0.0 <= spec.gamma < 1.0):
        raise MdpValidationError(f"gamma must lie in [0, 1), got {spec.gamma}")
    if spec.horizon is not None:
        check_positive_int(spec.horizon, "horizon")
    return spec


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """State-conditioned policy ``probs[state, action]``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = check_stochastic(self.probs, "policy")
        if probs.ndim != 2:
            raise MdpValidationError(f"policy table must be 2-D, got shape {probs.shape}")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    def augmented(self) -> "AugmentedTabularPolicy":
        """The same policy viewed as ignoring the previous action."""
        S, A = self.probs.shape
        return AugmentedTabularPolicy(np.broadcast_to(self.probs[:, None, :], (S, A + 1, A)))


@dataclass(frozen=True, eq=False)
class AugmentedTabularPolicy:
    """Policy conditioned on (state, previous action); shape (S, A + 1, A)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = check_stochastic(self.probs, "augmented policy")
        if probs.ndim != 3 or probs.shape[1] != probs.shape[2] + 1:
            raise MdpValidationError(
                f"augmented policy must have shape (S, A + 1, A), got {probs.shape}"
            )
        probs = np.array(probs)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __call__(self, state: int, prev_action: int, rng: np.random.Generator) -> int:
        return _draw(self.probs[state, prev_action], rng)


PolicyLike = Union[AugmentedTabularPolicy, TabularPolicy, Callable[[int, int, np.random.Generator], int]]


@dataclass
class Trajectory:
    """One episode: ``states[t]``, ``actions[t]``, ``rewards[t]`` for t = 0..T."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    initial_prev_action: Optional[int] = None

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class ValueTables:
    """Exact value tables of an augmented policy.

    ``q_core[s, a]`` is the soft Q-value, which for the augmented chain does not
    depend on the previous action; ``q_aug`` broadcasts it to (S, A + 1, A).
    ``v[s, p]`` is the soft state value given previous action ``p``.
    """

    q_core: np.ndarray
    q_aug: np.ndarray
    v: np.ndarray
    sweeps: int = 0
    residual: float = 0.0
    alpha: float = 0.0
    extra: dict = field(default_factory=dict)


def _draw(p: np.ndarray, rng: np.random.Generator) -> int:
    # inverse CDF on a single uniform keeps RNG consumption fixed at one draw per action
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(idx, len(p) - 1)


def _as_augmented(spec: MdpSpec, policy) -> AugmentedTabularPolicy:
    if isinstance(policy, TabularPolicy):
        policy = policy.augmented()
    if not isinstance(policy, AugmentedTabularPolicy):
        raise TypeError("exact routines need a tabular policy")
    if policy.probs.shape != (spec.n_states, spec.n_actions + 1, spec.n_actions):
        raise MdpValidationError(
            f"policy shape {policy.probs.shape} does not fit MDP with "
            f"{spec.n_states} states and {spec.n_actions} actions"
        )
    return policy


def _resolve_steps(spec: MdpSpec, n_steps: Optional[int]) -> int:
    steps = spec.horizon if n_steps is None else n_steps
    if steps is None:
        raise ValueError("unbounded horizon: pass n_steps to truncate sampling")
    return int(steps)


def sample_trajectory(spec: MdpSpec, policy: PolicyLike, rng=None, n_steps: Optional[int] = None) -> Trajectory:
    """Roll out one episode of ``n_steps + 1`` actions (default: the MDP horizon).

    ``policy`` is a tabular policy or a callable ``(state, prev_action, rng) -> action``
    where ``prev_action`` equals ``spec.null_action`` at t = 0.
    """
    rng = check_rng(rng)
    T = _resolve_steps(spec, n_steps)
    if isinstance(policy, TabularPolicy):
        policy = policy.augmented()
    cdf_rho = spec.rho0
    s = _draw(cdf_rho, rng)
    prev = spec.null_action
    states, actions, rewards = [], [], []
    for t in range(T + 1):
        a = int(policy(s, prev, rng))
        if not 0 <= a < spec.n_actions:
            raise ValueError(f"policy returned invalid action {a} at t={t}")
        states.append(s)
        actions.append(a)
        rewards.append(spec.reward[s, a])
        if t < T:
            s = _draw(spec.transition[s, a], rng)
        prev = a
    return Trajectory(np.array(states), np.array(actions), np.array(rewards, dtype=float))


def sample_episodes(spec: MdpSpec, policy, n_episodes: int, rng=None, n_steps: Optional[int] = None):
    """Vectorised rollout of many episodes under a tabular policy.

    Returns ``(states, actions, rewards)`` arrays of shape (n_episodes, T + 1).
    """
    rng = check_rng(rng)
    pol = _as_augmented(spec, policy).probs
    T = _resolve_steps(spec, n_steps)
    n = int(n_episodes)
    states = np.empty((n, T + 1), dtype=np.int64)
    actions = np.empty((n, T + 1), dtype=np.int64)
    cdf_P = np.cumsum(spec.transition, axis=-1)
    cdf_pi = np.cumsum(pol, axis=-1)
    S, A = spec.n_states, spec.n_actions
    s = np.minimum(np.searchsorted(np.cumsum(spec.rho0), rng.random(n), side="right"), S - 1)
    prev = np.full(n, spec.null_action)
    for t in range(T + 1):
        c = cdf_pi[s, prev]
        a = np.minimum((rng.random(n)[:, None] >= c).sum(axis=1), A - 1)
        states[:, t] = s
        actions[:, t] = a
        if t < T:
            c = cdf_P[s, a]
            s = np.minimum((rng.random(n)[:, None] >= c).sum(axis=1), S - 1)
        prev = a
    rewards = spec.reward[states, actions]
    return states, actions, rewards


def discounted_return(traj, gamma: float) -> float:
    """Sum of ``gamma**t * r_t`` over a trajectory (or a plain reward sequence)."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    rewards = np.asarray(traj.rewards if isinstance(traj, Trajectory) else traj, dtype=float)
    return float(np.sum(rewards * gamma ** np.arange(len(rewards))))


def oscillation_ratio_trajectory(traj) -> float:
    """Fraction of consecutive action pairs that differ.

    Accepts a Trajectory or an action sequence. At least two actions are needed.
    """
    actions = np.asarray(traj.actions if isinstance(traj, Trajectory) else traj)
    if actions.ndim != 1 or len(actions) < 2:
        raise UndefinedMetricError("oscillation ratio needs at least two actions")
    return float(np.mean(actions[1:] != actions[:-1]))


def oscillation_ratio_policy(spec: MdpSpec, policy: PolicyLike, n_episodes: int = 20, rng=None,
                             n_steps: Optional[int] = None) -> tuple[float, float]:
    """Mean and standard deviation of per-episode oscillation ratios.

    The mean is the ``(sum_i c_i / n_i) / n_episodes`` estimator.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    rng = check_rng(rng)
    if isinstance(policy, (TabularPolicy, AugmentedTabularPolicy)):
        _, actions, _ = sample_episodes(spec, policy, n_episodes, rng, n_steps)
        if actions.shape[1] < 2:
            raise UndefinedMetricError("oscillation ratio needs at least two actions")
        ratios = np.mean(actions[:, 1:] != actions[:, :-1], axis=1)
    else:
        ratios = np.array([
            oscillation_ratio_trajectory(sample_trajectory(spec, policy, rng, n_steps))
            for _ in range(n_episodes)
        ])
    return float(ratios.mean()), float(ratios.std())


def _soft_state_values(q: np.ndarray, pol: np.ndarray, alpha: float) -> np.ndarray:
    """``V[s, p] = sum_a pi[s, p, a] (Q[s, a] - alpha log pi[s, p, a])``.

    The expectation is taken relative to max_a Q so that a flat Q row yields its
    value exactly regardless of the policy row.
    """
    top = q.max(axis=1)
    v = top[:, None] + np.einsum("spa,sa->sp", pol, q - top[:, None])
    if alpha:
        v = v - alpha * np.sum(pol * np.log(np.maximum(pol, LOG_FLOOR)), axis=-1)
    return v


def exact_policy_evaluation(spec: MdpSpec, policy, alpha: float = 0.0, tol: float = DEFAULT_TOL,
                            max_sweeps: int = DEFAULT_MAX_SWEEPS, finite_horizon: bool = False) -> ValueTables:
    """Soft evaluation of a tabular (augmented) policy.

    By default iterates the infinite-horizon soft Bellman backup to a sup-norm
    residual below ``tol``. With ``finite_horizon=True`` runs backward induction
    over ``spec.horizon + 1`` decision steps and returns the t = 0 tables.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    pol = _as_augmented(spec, policy).probs
    S, A = spec.n_states, spec.n_actions
    P, R, g = spec.transition, spec.reward, spec.gamma

    if finite_horizon:
        if spec.horizon is None:
            raise ValueError("finite-horizon evaluation needs a finite horizon")
        v = np.zeros((S, A + 1))
        q = R.copy()
        for _ in range(spec.horizon + 1):
            q = R + g * np.einsum("sak,ka->sa", P, v[:, :A])
            v = _soft_state_values(q, pol, alpha)
        return ValueTables(q, np.broadcast_to(q[:, None, :], (S, A + 1, A)).copy(), v,
                           sweeps=spec.horizon + 1, residual=0.0, alpha=alpha)

    q = np.zeros((S, A))
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        v = _soft_state_values(q, pol, alpha)
        q_next = R + g * np.einsum("sak,ka->sa", P, v[:, :A])
        residual = float(np.max(np.abs(q_next - q)))
        q = q_next
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"soft evaluation did not converge in {max_sweeps} sweeps (residual {residual:.3e})",
            residual=residual,
        )
    v = _soft_state_values(q, pol, alpha)
    return ValueTables(q, np.broadcast_to(q[:, None, :], (S, A + 1, A)).copy(), v,
                       sweeps=sweep, residual=residual, alpha=alpha)


def exact_return(spec: MdpSpec, policy, alpha: float = 0.0, values: Optional[ValueTables] = None,
                 **eval_kwargs) -> float:
    """Expected (soft) discounted return from ``rho0`` with a null previous action."""
    if values is None:
        values = exact_policy_evaluation(spec, policy, alpha=alpha, **eval_kwargs)
    return float(spec.rho0 @ values.v[:, spec.null_action])


def expected_non_switches(spec: MdpSpec, policy) -> float:
    """Expected count of ``a_t == a_{t-1}`` over t = 1..T by backward induction."""
    if spec.horizon is None:
        raise ValueError("exact oscillation needs a finite horizon")
    pol = _as_augmented(spec, policy).probs
    S, A = spec.n_states, spec.n_actions
    P = spec.transition
    same = np.zeros((A + 1, A))
    same[np.arange(A), np.arange(A)] = 1.0
    w = np.zeros((S, A))  # w[s', a]: expected future non-switches after arriving in s' having played a
    for _ in range(spec.horizon):
        cont = np.einsum("sak,ka->sa", P, w)
        w_full = np.einsum("spa,spa->sp", pol, same[None, :, :] + cont[:, None, :])
        w = w_full[:, :A]
    cont = np.einsum("sak,ka->sa", P, w)
    w0 = np.einsum("sa,sa->s", pol[:, spec.null_action, :], cont)
    return float(spec.rho0 @ w0)


def exact_oscillation(spec: MdpSpec, policy) -> float:
    """Exact expected oscillation ratio over a horizon-T episode (undiscounted)."""
    if spec.horizon is None:
        raise ValueError("exact oscillation needs a finite horizon")
    return 1.0 - expected_non_switches(spec, policy) / spec.horizon


def garnet(n_states: int, n_actions: int, branching: int, reward_sparsity: float = 0.0, seed=None,
           gamma: float = 0.9, horizon: Optional[int] = 50) -> MdpSpec:
    """Random MDP where every (s, a) reaches exactly ``branching`` successors.

    Successor probabilities are Dirichlet(1); rewards are uniform on [0, 1] with a
    fraction ``reward_sparsity`` of (s, a) entries set to zero; rho0 is uniform.
    """
    check_positive_int(n_states, "n_states")
    check_positive_int(n_actions, "n_actions")
    if not 1 <= branching <= n_states:
        raise ValueError(f"branching must lie in [1, {n_states}], got {branching}")
    if not 0.0 <= reward_sparsity <= 1.0:
        raise ValueError("reward_sparsity must lie in [0, 1]")
    rng = check_rng(seed)
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            succ = rng.choice(n_states, size=branching, replace=False)
            w = rng.dirichlet(np.ones(branching))
            # Dirichlet draws can underflow to exactly 0; keep every successor reachable
            w = np.maximum(w, 1e-9)
            P[s, a, succ] = w / w.sum()
    R = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    n_zero = int(round(reward_sparsity * R.size))
    if n_zero:
        R.flat[rng.choice(R.size, size=n_zero, replace=False)] = 0.0
    rho0 = np.full(n_states, 1.0 / n_states)
    return validate_mdp(MdpSpec(P, R, rho0, gamma, horizon))
