"""Exact soft policy iteration and nested policy iteration on tabular MDPs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from picrl.exceptions import ConvergenceError
from picrl.mdp import (
    DEFAULT_TOL,
    LOG_FLOOR,
    AugmentedTabularPolicy,
    MdpSpec,
    TabularPolicy,
    ValueTables,
    exact_oscillation,
    exact_policy_evaluation,
    exact_return,
    validate_mdp,
)
from picrl.mixing import mixed_policy_table

DEFAULT_MU_GRID = tuple(np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 10))


def soft_policy_improvement(q, alpha: float) -> TabularPolicy:
    """Boltzmann policy ``exp(Q / alpha)`` per state; greedy (lowest index on ties) at alpha = 0."""
    q = np.asarray(q.q_core if isinstance(q, ValueTables) else q, dtype=float)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        probs = np.zeros_like(q)
        probs[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
        return TabularPolicy(probs)
    z = (q - q.max(axis=1, keepdims=True)) / alpha
    e = np.exp(z)
    return TabularPolicy(e / e.sum(axis=1, keepdims=True))


def soft_objective(spec: MdpSpec, policy, alpha: float, tol: float = DEFAULT_TOL) -> float:
    return exact_return(spec, policy, alpha=alpha, tol=tol)


def soft_policy_iteration(spec: MdpSpec, alpha: float, init: Optional[TabularPolicy] = None,
                          max_iter: int = 500, policy_tol: float = 1e-11, eval_tol: float = DEFAULT_TOL):
    """Alternate exact soft evaluation and Boltzmann improvement until the policy stops moving.

    Returns ``(policy, values, j_history)``; ``j_history[k]`` is the soft objective
    after k improvement steps.
    """
    validate_mdp(spec)
    policy = init if init is not None else TabularPolicy.uniform(spec.n_states, spec.n_actions)
    values = exact_policy_evaluation(spec, policy, alpha=alpha, tol=eval_tol)
    j_history = [exact_return(spec, policy, values=values)]
    for _ in range(max_iter):
        new = soft_policy_improvement(values, alpha)
        delta = float(np.max(np.abs(new.probs - policy.probs)))
        policy = new
        values = exact_policy_evaluation(spec, policy, alpha=alpha, tol=eval_tol)
        j_history.append(exact_return(spec, policy, values=values))
        if delta < policy_tol:
            break
    else:
        raise ConvergenceError(f"soft policy iteration did not settle in {max_iter} steps",
                               residual=delta)
    return policy, values, j_history


def _mixture_objective(core_row: np.ndarray, q_row: np.ndarray, prev: int, mus: np.ndarray,
                       alpha: float) -> np.ndarray:
    """Soft one-step value of mixing ``core_row`` with a Dirac on ``prev`` for each mu."""
    m = (1.0 - mus)[:, None] * core_row[None, :]
    m[:, prev] += mus
    top = q_row.max()
    val = top + m @ (q_row - top)
    if alpha:
        val = val - alpha * np.sum(m * np.log(np.maximum(m, LOG_FLOOR)), axis=1)
    return val


def outer_mu_improvement(spec: MdpSpec, core: TabularPolicy, q_aug, alpha_mix: float,
                         mu_grid: Sequence[float] = DEFAULT_MU_GRID,
                         current_mu: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-(state, prev_action) weight maximising the soft one-step value of the mixture.

    Candidates are ``mu_grid`` plus, if given, the current weight so the step never
    lowers the one-step value. Ties go to the smaller weight. The null column is 0.
    """
    q = np.asarray(q_aug.q_aug if isinstance(q_aug, ValueTables) else q_aug, dtype=float)
    S, A = spec.n_states, spec.n_actions
    if q.ndim == 2:
        q = np.broadcast_to(q[:, None, :], (S, A + 1, A))
    grid = np.asarray(mu_grid, dtype=float)
    mu = np.zeros((S, A + 1))
    for s in range(S):
        for p in range(A):
            cands = grid if current_mu is None else np.append(grid, current_mu[s, p])
            cands = np.unique(cands)  # sorted ascending, so argmax breaks ties low
            vals = _mixture_objective(core.probs[s], q[s, p], p, cands, alpha_mix)
            mu[s, p] = cands[int(np.argmax(vals))]
    return mu


@dataclass
class Lemma1Params:
    n_factor: float = 8.0
    c0: float = 1.0
    series_sum: Optional[float] = None

    def __post_init__(self):
        if self.n_factor < 4:
            raise ValueError("n_factor must be >= 4")
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")


@dataclass
class Lemma1Result:
    passed: bool
    bound: float
    min_improvement: float
    series_sum: float
    max_mu: float


def lemma1_series(gamma: float, horizon: Optional[int] = None) -> float:
    """``sum_{t=0}^{T} t gamma^t``; closed form ``gamma / (1 - gamma)^2`` when T is unbounded."""
    if horizon is None:
        return gamma / (1.0 - gamma) ** 2
    t = np.arange(horizon + 1)
    return float(np.sum(t * gamma ** t))


def estimate_c0(tables: Sequence[ValueTables], safety: float = 1.1) -> float:
    """Certified advantage bound: ``safety * max |Q - V|`` over the given exact tables."""
    worst = 0.0
    for vt in tables:
        adv = vt.q_aug - vt.v[:, :, None]
        worst = max(worst, float(np.max(np.abs(adv))))
    return safety * max(worst, 1e-300)


def lemma1_gate(q_core_old, q_core_new, mu_table, params: Lemma1Params, gamma: float,
                horizon: Optional[int] = None, tol: float = 0.0) -> Lemma1Result:
    """Check whether every inertia weight is within the intermediate-improvement bound.

    bound = min(Q_new - Q_old) / (N * C0 * sum_t t gamma^t). A negative minimum
    improvement yields a nonpositive bound and the gate fails.
    """
    q_old = np.asarray(getattr(q_core_old, "q_core", q_core_old), dtype=float)
    q_new = np.asarray(getattr(q_core_new, "q_core", q_core_new), dtype=float)
    series = params.series_sum if params.series_sum is not None else lemma1_series(gamma, horizon)
    min_imp = float(np.min(q_new - q_old))
    denom = params.n_factor * params.c0 * series
    bound = min_imp / denom if denom > 0 else (np.inf if min_imp >= 0 else -np.inf)
    mu = np.asarray(mu_table, dtype=float)
    if mu.ndim == 2 and mu.shape[1] == q_old.shape[1] + 1:
        mu = mu[:, :-1]  # the null slot is never mixed
    max_mu = float(np.max(mu)) if mu.size else 0.0
    passed = min_imp >= -tol and max_mu <= bound + tol
    return Lemma1Result(bool(passed), float(bound), min_imp, float(series), max_mu)


@dataclass
class NpiConfig:
    alpha_core: float = 0.1
    alpha_mix: float = 0.01
    outer_iters: int = 10
    inner_iters: int = 1
    mu_grid: Sequence[float] = DEFAULT_MU_GRID
    eval_tol: float = 1e-12
    enforce_gate: bool = True
    n_factor: float = 8.0
    c0_safety: float = 1.1
    gate_tol: float = 1e-9
    force_mu_zero: bool = False
    series_horizon: Optional[int] = None

    def __post_init__(self):
        if self.alpha_core < 0 or self.alpha_mix < 0:
            raise ValueError("temperatures must be nonnegative")
        if self.outer_iters < 0 or self.inner_iters < 0:
            raise ValueError("iteration counts must be nonnegative")
        if len(self.mu_grid) == 0:
            raise ValueError("mu_grid must be nonempty")
        if self.eval_tol <= 0:
            raise ValueError("eval_tol must be positive")


@dataclass
class NpiResult:
    core: TabularPolicy
    mu: np.ndarray
    policy: AugmentedTabularPolicy
    j_history: list
    xi_history: list
    return_history: list
    gate_log: list = field(default_factory=list)


def nested_policy_iteration(spec: MdpSpec, config: NpiConfig = None,
                            init_core: Optional[TabularPolicy] = None,
                            init_mu: Optional[np.ndarray] = None) -> NpiResult:
    """Run the inner (core) / outer (inertia weight) iteration scheme.

    Each outer iteration does ``inner_iters`` soft policy iteration steps on the core
    at ``alpha_core``, then, if ``enforce_gate``, keeps the new core only when the
    current weights satisfy the intermediate-improvement bound (with core values
    measured at ``alpha_mix``, the outer objective). Finally the mixed policy is
    evaluated at ``alpha_mix`` and the weights are re-chosen per (state, prev_action).

    ``j_history`` holds the soft objective of the mixed policy at ``alpha_mix``;
    index 0 is the initial policy.
    """
    config = config or NpiConfig()
    validate_mdp(spec)
    S, A = spec.n_states, spec.n_actions
    a_mix, tol = config.alpha_mix, config.eval_tol
    core = init_core if init_core is not None else TabularPolicy.uniform(S, A)
    mu = np.zeros((S, A + 1)) if init_mu is None else np.array(init_mu, dtype=float)
    mu[:, A] = 0.0

    def record(policy, values):
        j_hist.append(exact_return(spec, policy, values=values))
        ret_hist.append(exact_return(spec, policy, alpha=0.0, tol=tol))
        xi_hist.append(exact_oscillation(spec, policy) if spec.horizon is not None else float("nan"))

    j_hist, xi_hist, ret_hist, gate_log = [], [], [], []
    policy = mixed_policy_table(core, mu)
    record(policy, exact_policy_evaluation(spec, policy, alpha=a_mix, tol=tol))

    for it in range(config.outer_iters):
        core_old = core
        for _ in range(config.inner_iters):
            vals = exact_policy_evaluation(spec, core, alpha=config.alpha_core, tol=tol)
            core = soft_policy_improvement(vals, config.alpha_core)

        if config.enforce_gate and config.inner_iters > 0:
            q_old_core = exact_policy_evaluation(spec, core_old, alpha=a_mix, tol=tol)
            q_new_core = exact_policy_evaluation(spec, core, alpha=a_mix, tol=tol)
            old_mixed = exact_policy_evaluation(spec, mixed_policy_table(core_old, mu), alpha=a_mix, tol=tol)
            c0 = estimate_c0([q_new_core, old_mixed], config.c0_safety)
            gate = lemma1_gate(q_old_core, q_new_core, mu, Lemma1Params(config.n_factor, c0),
                               spec.gamma, config.series_horizon, tol=config.gate_tol)
            entry = {"iteration": it, "passed": gate.passed, "bound": gate.bound,
                     "min_improvement": gate.min_improvement, "max_mu": gate.max_mu, "c0": c0}
            if gate.passed:
                mid = exact_policy_evaluation(spec, mixed_policy_table(core, mu), alpha=a_mix, tol=tol)
                entry["mid_minus_old"] = float(np.min(mid.q_aug - old_mixed.q_aug))
                entry["lemma_rhs"] = (1.0 - 4.0 / config.n_factor) * gate.min_improvement
            else:
                core = core_old
            gate_log.append(entry)

        policy = mixed_policy_table(core, mu)
        values = exact_policy_evaluation(spec, policy, alpha=a_mix, tol=tol)
        if not config.force_mu_zero:
            mu = outer_mu_improvement(spec, core, values, a_mix, config.mu_grid, current_mu=mu)
            policy = mixed_policy_table(core, mu)
            values = exact_policy_evaluation(spec, policy, alpha=a_mix, tol=tol)
        record(policy, values)

    return NpiResult(core, mu, policy, j_hist, xi_hist, ret_hist, gate_log)


def _augmented_return_by_solve(spec: MdpSpec, policy: AugmentedTabularPolicy) -> float:
    S, A = spec.n_states, spec.n_actions
    pol = policy.probs
    M = np.einsum("spa,sak->spka", pol, spec.transition)
    M_full = np.zeros((S, A + 1, S, A + 1))
    M_full[:, :, :, :A] = M
    n = S * (A + 1)
    rew = np.einsum("spa,sa->sp", pol, spec.reward).reshape(n)
    v = np.linalg.solve(np.eye(n) - spec.gamma * M_full.reshape(n, n), rew).reshape(S, A + 1)
    return float(spec.rho0 @ v[:, A])


@dataclass
class Theorem1Report:
    mu: np.ndarray
    xi_core: float
    xi_best: float
    j_core: float
    j_best: float

    @property
    def strict_reduction(self) -> bool:
        return self.xi_best < self.xi_core - 1e-12


def theorem1_oracle(spec: MdpSpec, core: TabularPolicy, mu_grid: Sequence[float] = DEFAULT_MU_GRID,
                    max_passes: int = 3, j_slack: float = 1e-10) -> Theorem1Report:
    """Search constant-per-(state, prev_action) weights that smooth without losing return.

    Greedy coordinate search from the all-zero table: each coordinate takes the grid
    value with the lowest exact oscillation among those keeping the plain
    discounted return within ``j_slack`` of the core's. The reported J and xi are
    recomputed with the standard exact evaluators.
    """
    if spec.horizon is None:
        raise ValueError("the oracle needs a finite horizon for exact oscillation")
    S, A = spec.n_states, spec.n_actions
    grid = np.unique(np.asarray(mu_grid, dtype=float))
    mu = np.zeros((S, A + 1))
    base = mixed_policy_table(core, mu)
    j_core_s = _augmented_return_by_solve(spec, base)
    xi_cur = exact_oscillation(spec, base)
    for _ in range(max_passes):
        changed = False
        for s in range(S):
            for p in range(A):
                best_val, best_xi = mu[s, p], xi_cur
                for m in grid:
                    if m == mu[s, p]:
                        continue
                    trial = mu.copy()
                    trial[s, p] = m
                    pol = mixed_policy_table(core, trial)
                    xi = exact_oscillation(spec, pol)
                    if xi < best_xi - 1e-13 and _augmented_return_by_solve(spec, pol) >= j_core_s - j_slack:
                        best_val, best_xi = m, xi
                if best_val != mu[s, p]:
                    mu[s, p], xi_cur, changed = best_val, best_xi, True
        if not changed:
            break
    best = mixed_policy_table(core, mu)
    return Theorem1Report(
        mu=mu,
        xi_core=exact_oscillation(spec, base),
        xi_best=exact_oscillation(spec, best),
        j_core=exact_return(spec, base, tol=1e-13),
        j_best=exact_return(spec, best, tol=1e-13),
    )


class SoftPolicyIteration(BaseEstimator):
    """Estimator wrapper around :func:`soft_policy_iteration`.

    ``fit(spec)`` sets ``policy_``, ``values_`` and ``j_history_``.
    """

    def __init__(self, alpha=0.1, max_iter=500, eval_tol=DEFAULT_TOL):
        self.alpha = alpha
        self.max_iter = max_iter
        self.eval_tol = eval_tol

    def fit(self, spec: MdpSpec, y=None):
        self.policy_, self.values_, self.j_history_ = soft_policy_iteration(
            spec, self.alpha, max_iter=self.max_iter, eval_tol=self.eval_tol)
        return self

    def predict_proba(self, states):
        return self.policy_.probs[np.asarray(states, dtype=int)]

    def predict(self, states):
        return np.argmax(self.predict_proba(states), axis=-1)


class NestedPolicyIteration(BaseEstimator):
    """Estimator wrapper around :func:`nested_policy_iteration`.

    After ``fit(spec)``: ``core_``, ``mu_``, ``policy_`` (augmented table),
    ``j_history_``, ``xi_history_``, ``return_history_``, ``gate_log_``.
    ``predict_proba(states, prev_actions)`` returns mixed-policy rows; pass
    ``prev_actions = n_actions`` for the null previous action.
    """

    def __init__(self, alpha_core=0.1, alpha_mix=0.01, outer_iters=10, inner_iters=1,
                 mu_grid=DEFAULT_MU_GRID, eval_tol=1e-12, enforce_gate=True, n_factor=8.0,
                 force_mu_zero=False):
        self.alpha_core = alpha_core
        self.alpha_mix = alpha_mix
        self.outer_iters = outer_iters
        self.inner_iters = inner_iters
        self.mu_grid = mu_grid
        self.eval_tol = eval_tol
        self.enforce_gate = enforce_gate
        self.n_factor = n_factor
        self.force_mu_zero = force_mu_zero

    def fit(self, spec: MdpSpec, y=None):
        cfg = NpiConfig(alpha_core=self.alpha_core, alpha_mix=self.alpha_mix,
                        outer_iters=self.outer_iters, inner_iters=self.inner_iters,
                        mu_grid=self.mu_grid, eval_tol=self.eval_tol,
                        enforce_gate=self.enforce_gate, n_factor=self.n_factor,
                        force_mu_zero=self.force_mu_zero)
        res = nested_policy_iteration(spec, cfg)
        self.core_, self.mu_, self.policy_ = res.core, res.mu, res.policy
        self.j_history_, self.xi_history_ = res.j_history, res.xi_history
        self.return_history_, self.gate_log_ = res.return_history, res.gate_log
        return self

    def predict_proba(self, states, prev_actions):
        return self.policy_.probs[np.asarray(states, dtype=int), np.asarray(prev_actions, dtype=int)]

    def predict(self, states, prev_actions):
        return np.argmax(self.predict_proba(states, prev_actions), axis=-1)
