"""Property suites that check the solvers and learners against independent oracles.

Each suite returns a :class:`SuiteReport` holding pass/fail, the worst observed
violation and a few human-readable lines. Failures are report content, not
exceptions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from picrl import oracles
from picrl.agents import NSAC, DiscreteSAC, EpsilonSchedule
from picrl.agents import losses as L
from picrl.agents.replay import Batch
from picrl.envs import InconsistencyPenaltyWrapper, RepetitionActionSpace, make_env
from picrl.envs.base import Env
from picrl.mdp import (
    AugmentedTabularPolicy,
    MdpSpec,
    TabularPolicy,
    exact_oscillation,
    exact_policy_evaluation,
    exact_return,
    garnet,
    oscillation_ratio_trajectory,
)
from picrl.mixing import mixed_policy_table
from picrl.nn import mlp
from picrl.npi import (
    Lemma1Params,
    NpiConfig,
    estimate_c0,
    lemma1_gate,
    nested_policy_iteration,
    soft_policy_improvement,
    soft_policy_iteration,
    theorem1_oracle,
)

SUITES = ("tabular", "metrics", "gradcheck", "reduction", "theorem1", "lemma1", "npi-monotone",
          "baselines", "ablation")


@dataclass
class SuiteReport:
    name: str
    passed: bool
    worst: float
    lines: list = field(default_factory=list)
    seconds: float = 0.0

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst={self.worst:.3e} ({self.seconds:.1f}s)"


def _random_augmented(rng, S, A, concentration=1.0) -> AugmentedTabularPolicy:
    return AugmentedTabularPolicy(rng.dirichlet(np.full(A, concentration), size=(S, A + 1)))


def _random_core(rng, S, A, concentration=1.0) -> TabularPolicy:
    return TabularPolicy(rng.dirichlet(np.full(A, concentration), size=S))


# -- tabular -----------------------------------------------------------------
def suite_tabular(n_mdps: int = 20, tol: float = 1e-6, alphas=(0.0, 0.1), seed: int = 0) -> SuiteReport:
    """Sweep-based soft evaluation versus a dense solve; soft policy iteration
    versus soft value iteration."""
    rng = np.random.default_rng(seed)
    worst_eval, worst_opt = 0.0, 0.0
    for i in range(n_mdps):
        S = int(rng.integers(2, 11))
        A = int(rng.integers(2, 5))
        spec = garnet(S, A, min(S, 3), seed=int(rng.integers(2 ** 31)), gamma=0.9)
        pol = _random_augmented(rng, S, A)
        for alpha in alphas:
            v_sweep = exact_policy_evaluation(spec, pol, alpha=alpha).v
            v_solve = oracles.soft_values_by_solve(spec, pol, alpha)
            worst_eval = max(worst_eval, float(np.max(np.abs(v_sweep - v_solve))))
            _, vals, _ = soft_policy_iteration(spec, alpha)
            q_vi, _ = oracles.soft_value_iteration(spec, alpha)
            worst_opt = max(worst_opt, float(np.max(np.abs(vals.q_core - q_vi))))
    worst = max(worst_eval, worst_opt)
    lines = [f"evaluation vs dense solve: max |dV| = {worst_eval:.3e} over {n_mdps} MDPs x alpha {list(alphas)}",
             f"policy iteration vs value iteration: max |dQ*| = {worst_opt:.3e}"]
    return SuiteReport("tabular", worst <= tol, worst, lines)


# -- metrics -----------------------------------------------------------------
def suite_metrics(n_policies: int = 10, n_episodes: int = 4000, z: float = 3.0, seed: int = 1) -> SuiteReport:
    canonical = {(0, 0, 0, 0, 0): 0.0, (0, 1, 0, 1, 0): 1.0, (0, 0, 1, 1, 0): 0.5}
    bad = [seq for seq, want in canonical.items() if oscillation_ratio_trajectory(seq) != want]
    rng = np.random.default_rng(seed)
    worst_z = 0.0
    for _ in range(n_policies):
        spec = garnet(4, 3, 2, seed=int(rng.integers(2 ** 31)), horizon=20)
        pol = _random_augmented(rng, 4, 3)
        mc, se = oracles.monte_carlo_oscillation(spec, pol, n_episodes, rng)
        worst_z = max(worst_z, abs(mc - exact_oscillation(spec, pol)) / se)
    lines = [f"canonical sequences: {'ok' if not bad else 'mismatch on ' + str(bad)}",
             f"exact vs Monte Carlo oscillation: worst |z| = {worst_z:.2f} over {n_policies} policies"]
    return SuiteReport("metrics", not bad and worst_z <= z, worst_z, lines)


# -- gradients ---------------------------------------------------------------
def gradcheck_problem(seed: int = 0, state_dim: int = 4, n_actions: int = 3, hidden=(8, 8), batch: int = 12):
    """Random small networks and a random batch (some null previous actions)."""
    rng = np.random.default_rng(seed)
    S, A = state_dim, n_actions
    nets = {
        "actor": mlp(S, A, hidden, "softmax", seed=seed + 1),
        "q1": mlp(S, A, hidden, seed=seed + 2), "q2": mlp(S, A, hidden, seed=seed + 3),
        "q1_target": mlp(S, A, hidden, seed=seed + 4), "q2_target": mlp(S, A, hidden, seed=seed + 5),
        "pic": mlp(S + A, 1, hidden, "tanh", seed=seed + 6),
        "mq1": mlp(S + A, A, hidden, seed=seed + 7), "mq2": mlp(S + A, A, hidden, seed=seed + 8),
        "mq1_target": mlp(S + A, A, hidden, seed=seed + 9), "mq2_target": mlp(S + A, A, hidden, seed=seed + 10),
    }
    b = Batch(rng.normal(size=(batch, S)), rng.integers(0, A + 1, size=batch), rng.integers(0, A, size=batch),
              rng.normal(size=batch), rng.normal(size=(batch, S)), (rng.random(batch) < 0.3).astype(float))
    return nets, b


def loss_closures(nets, batch, n_actions, gamma=0.99, alpha_core=0.1, alpha_mix=0.05, mu0=0.1):
    """Map loss name -> (callable returning LossResult, {grad key: network})."""
    n = nets
    return {
        "core_critic": (lambda: L.core_critic_loss((n["q1"], n["q2"]), (n["q1_target"], n["q2_target"]),
                                                   n["actor"], batch, gamma, alpha_core),
                        {"q1": n["q1"], "q2": n["q2"]}),
        "core_actor": (lambda: L.core_actor_loss(n["actor"], (n["q1"], n["q2"]), batch, alpha_core),
                       {"actor": n["actor"]}),
        "mix_critic": (lambda: L.mix_critic_loss((n["mq1"], n["mq2"]), (n["mq1_target"], n["mq2_target"]),
                                                 n["actor"], n["pic"], batch, gamma, alpha_mix, n_actions, mu0),
                       {"mq1": n["mq1"], "mq2": n["mq2"]}),
        "pic": (lambda: L.pic_loss(n["pic"], n["actor"], (n["mq1"], n["mq2"]), batch, alpha_mix, n_actions, mu0),
                {"pic": n["pic"]}),
        "dqn_td": (lambda: L.dqn_loss(n["q1"], n["q1_target"], batch, gamma), {"q": n["q1"]}),
    }


def suite_gradcheck(tol: float = 1e-4, h: float = 1e-5, seeds=(0, 1), state_dim: int = 4,
                    hidden=(8, 8)) -> SuiteReport:
    """Central finite differences against every loss's analytic gradients.

    The error per network is ``||g - g_fd|| / max(||g||, ||g_fd||)``. Also checks
    the stop-gradient contract: each loss returns gradients for exactly the
    networks it trains.
    """
    worst, lines, contract_ok = 0.0, [], True
    per_loss = {}
    for seed in seeds:
        nets, batch = gradcheck_problem(seed, state_dim=state_dim, hidden=hidden)
        A = nets["actor"].sizes[-1]
        for name, (fn, owned) in loss_closures(nets, batch, A).items():
            res = fn()
            if set(res.grads) != set(owned):
                contract_ok = False
                lines.append(f"{name}: gradient keys {sorted(res.grads)} != {sorted(owned)}")
            for key, net in owned.items():
                fd = oracles.finite_difference_grads(lambda: fn().value, net.params, h)
                err = oracles.relative_error(res.grads[key], fd)
                per_loss[f"{name}[{key}]"] = max(per_loss.get(f"{name}[{key}]", 0.0), err)
                worst = max(worst, err)
    lines += [f"{k}: max rel err {v:.2e}" for k, v in per_loss.items()]
    lines.append(f"stop-gradient contract: {'ok' if contract_ok else 'VIOLATED'}")
    return SuiteReport("gradcheck", contract_ok and worst < tol, worst, lines)


# -- reduction ---------------------------------------------------------------
def core_loss_trace(agent, env, n_updates: int, env_seed: int = 0) -> list:
    """Train until ``n_updates`` updates ran; return the (core Q, core pi) loss pairs."""
    agent.initialize(env, env_seed=env_seed)
    trace = []
    while agent.updates_ < n_updates:
        before = agent.updates_
        agent.env_step(env)
        if agent.updates_ > before:
            trace.append((agent.last_losses_["loss_core_q"], agent.last_losses_["loss_core_pi"]))
    return trace


def suite_reduction(n_updates: int = 1000, seed: int = 7, env: str = "twoway-mini") -> SuiteReport:
    nsac = core_loss_trace(NSAC(seed=seed, mu_clamp=0.0, outer_updates=False), make_env(env, "complex"),
                           n_updates, env_seed=seed)
    sac = core_loss_trace(DiscreteSAC(seed=seed), make_env(env, "complex"), n_updates, env_seed=seed)
    mismatches = sum(a != b for a, b in zip(nsac, sac)) + abs(len(nsac) - len(sac))
    worst = max((max(abs(a[0] - b[0]), abs(a[1] - b[1])) for a, b in zip(nsac, sac)), default=0.0)
    lines = [f"{len(sac)} updates compared, {mismatches} differ (max |diff| {worst:.3e})"]
    return SuiteReport("reduction", mismatches == 0 and len(sac) == n_updates, worst, lines)


# -- theorem 1 ---------------------------------------------------------------
def symmetric_mdp(gamma: float = 0.9, horizon: int = 10) -> MdpSpec:
    """One state, two actions with equal rewards."""
    return MdpSpec(np.ones((1, 2, 1)), np.full((1, 2), 0.5), np.array([1.0]), gamma, horizon)


def suite_theorem1(n_mdps: int = 100, xi_tol: float = 1e-12, j_tol: float = 1e-9, seed: int = 3) -> SuiteReport:
    spec = symmetric_mdp()
    core = TabularPolicy(np.array([[0.5, 0.5]]))
    rep = theorem1_oracle(spec, core, mu_grid=[0.0, 0.5])
    sym_ok = rep.xi_core == 0.5 and rep.xi_best == 0.25 and rep.j_best - rep.j_core == 0.0
    lines = [f"symmetric MDP: xi {rep.xi_core} -> {rep.xi_best}, dJ = {rep.j_best - rep.j_core!r}"]
    rng = np.random.default_rng(seed)
    worst_xi, worst_j, strict = -np.inf, -np.inf, 0
    for _ in range(n_mdps):
        S, A = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        spec = garnet(S, A, min(S, 2), seed=int(rng.integers(2 ** 31)), gamma=0.9, horizon=20)
        rep = theorem1_oracle(spec, _random_core(rng, S, A), max_passes=2)
        worst_xi = max(worst_xi, rep.xi_best - rep.xi_core)
        worst_j = max(worst_j, rep.j_core - rep.j_best)
        strict += rep.strict_reduction
    lines.append(f"{n_mdps} Garnets: max (xi - xi_core) = {worst_xi:.3e}, max (J_core - J) = {worst_j:.3e}, "
                 f"strict reductions {strict}/{n_mdps}")
    ok = sym_ok and worst_xi <= xi_tol and worst_j <= j_tol
    return SuiteReport("theorem1", ok, max(worst_xi, worst_j, 0.0), lines)


# -- lemma 1 / monotone NPI --------------------------------------------------
def suite_npi_monotone(n_seeds: int = 20, tol: float = 1e-8, n_factor: float = 8.0, outer_iters: int = 10,
                       lemma_slack: float = 1e-8) -> SuiteReport:
    """Gate-enforced nested policy iteration on Garnets: J never drops, and the
    intermediate improvement holds whenever the gate passes."""
    worst_drop, worst_lemma, monotone, gate_passes = 0.0, -np.inf, 0, 0
    for seed in range(n_seeds):
        spec = garnet(5, 3, 2, seed=seed, gamma=0.9, horizon=30)
        res = nested_policy_iteration(spec, NpiConfig(outer_iters=outer_iters, n_factor=n_factor))
        drops = -np.diff(res.j_history)
        drop = float(drops.max()) if drops.size else 0.0
        worst_drop = max(worst_drop, drop)
        monotone += drop <= tol
        for e in res.gate_log:
            if e["passed"]:
                gate_passes += 1
                worst_lemma = max(worst_lemma, e["lemma_rhs"] - lemma_slack - e["mid_minus_old"])
    lemma_ok = worst_lemma <= 0.0
    lines = [f"J non-decreasing on {monotone}/{n_seeds} seeds (largest drop {worst_drop:.3e})",
             f"gate passed {gate_passes} times; worst lemma violation {worst_lemma:.3e}"]
    return SuiteReport("npi-monotone", monotone == n_seeds and lemma_ok, worst_drop, lines)


def suite_lemma1(n_cases: int = 20, alphas=(0.0, 0.01, 0.1), n_factor: float = 8.0, slack: float = 1e-8,
                 seed: int = 11) -> SuiteReport:
    """Put every inertia weight exactly at the gate's bound after one soft
    improvement step of a random core, then measure the intermediate improvement
    ``Q(mix(core_new, mu)) - Q(mix(core_old, mu))``."""
    rng = np.random.default_rng(seed)
    worst, n_checked = -np.inf, 0
    for _ in range(n_cases):
        S, A = int(rng.integers(2, 6)), int(rng.integers(2, 4))
        spec = garnet(S, A, min(S, 2), seed=int(rng.integers(2 ** 31)), gamma=0.9, horizon=None)
        core_old = _random_core(rng, S, A)
        for alpha in alphas:
            v_old = exact_policy_evaluation(spec, core_old, alpha=alpha, tol=1e-12)
            core_new = soft_policy_improvement(v_old, alpha)
            v_new = exact_policy_evaluation(spec, core_new, alpha=alpha, tol=1e-12)
            c0 = estimate_c0([v_old, v_new])
            gate = lemma1_gate(v_old, v_new, np.zeros((S, A + 1)), Lemma1Params(n_factor, c0), spec.gamma)
            if gate.min_improvement <= 0:
                continue
            mu = np.full((S, A + 1), min(1.0, gate.bound))
            old_mixed = exact_policy_evaluation(spec, mixed_policy_table(core_old, mu), alpha=alpha, tol=1e-12)
            mid = exact_policy_evaluation(spec, mixed_policy_table(core_new, mu), alpha=alpha, tol=1e-12)
            rhs = (1.0 - 4.0 / n_factor) * gate.min_improvement - slack
            worst = max(worst, rhs - float(np.min(mid.q_aug - old_mixed.q_aug)))
            n_checked += 1
    lines = [f"{n_checked} boundary cases; worst (rhs - measured) = {worst:.3e} (<= 0 passes)"]
    return SuiteReport("lemma1", n_checked > 0 and worst <= 0.0, worst, lines)


# -- baselines / ablation ----------------------------------------------------
class _ScriptedEnv(Env):
    """Constant-reward env that records the actions it receives."""

    state_dim, n_actions, max_steps = 1, 5, 100

    def _reset(self):
        self.received = []
        return np.zeros(1)

    def _step(self, action):
        self.received.append(action)
        return np.zeros(1), 1.0, False


def suite_baselines() -> SuiteReport:
    problems = []
    space = RepetitionActionSpace(5, (1, 2, 4, 8))
    if space.n_actions != 20:
        problems.append(f"repetition space has {space.n_actions} actions")
    if any(space.encode(*space.decode(i)) != i for i in range(space.n_actions)):
        problems.append("decode/encode is not the identity")
    env = InconsistencyPenaltyWrapper(_ScriptedEnv(), -0.05)
    env.reset(0)
    train_r = [env.step(a)[1] for a in (0, 1, 0, 1, 1)]
    env.eval()
    env.reset(0)
    eval_r = [env.step(a)[1] for a in (0, 1, 0, 1, 1)]
    if train_r != [1.0, 1.0 - 0.05, 1.0 - 0.05, 1.0 - 0.05, 1.0] or eval_r != [1.0] * 5:
        problems.append(f"penalty rewards train={train_r} eval={eval_r}")
    sched = EpsilonSchedule()
    if sched(0) != 1.0 or sched(180_000) != 0.1 or sched(10 ** 7) != 0.1:
        problems.append(f"epsilon schedule: {sched(0)}, {sched(180_000)}")
    lines = ["repetition 5 x {1,2,4,8} -> 20 actions; penalty -0.05 per switch; epsilon(180000) = 0.1"]
    return SuiteReport("baselines", not problems, float(len(problems)), lines + problems)


def ablation_oscillation(mu0_values=(0.0, 0.2, 0.4, 0.6), n_cores: int = 3, n_episodes: int = 30,
                         complexity: str = "simple", seed: int = 5) -> np.ndarray:
    """Oscillation ratio of untrained NSAC policies for each mu0 (rows: cores).

    Each core keeps its random networks across mu0 values and every mu0 sees the
    same evaluation seeds.
    """
    from picrl.harness.training import evaluate

    out = np.zeros((n_cores, len(mu0_values)))
    for c in range(n_cores):
        for j, mu0 in enumerate(mu0_values):
            env = make_env("twoway-mini", complexity)
            agent = NSAC(seed=seed + c, mu0=mu0).initialize(env)
            out[c, j] = evaluate(agent, env, n_episodes, np.random.default_rng(seed + 100 + c))[2]
    return out


def suite_ablation(mu0_values=(0.0, 0.2, 0.4, 0.6), n_cores: int = 3, n_episodes: int = 30) -> SuiteReport:
    osc = ablation_oscillation(mu0_values, n_cores, n_episodes)
    rises = np.diff(osc, axis=1)
    worst = float(rises.max())
    lines = [f"core {c}: " + ", ".join(f"mu0={m}: {x:.3f}" for m, x in zip(mu0_values, row))
             for c, row in enumerate(osc)]
    return SuiteReport("ablation", worst <= 0.0, worst, lines)


_RUNNERS = {
    "tabular": suite_tabular,
    "metrics": suite_metrics,
    "gradcheck": suite_gradcheck,
    "reduction": suite_reduction,
    "theorem1": suite_theorem1,
    "lemma1": suite_lemma1,
    "npi-monotone": suite_npi_monotone,
    "baselines": suite_baselines,
    "ablation": suite_ablation,
}


def verify_suite(name: str, **kwargs) -> SuiteReport:
    """Run one named suite and time it."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    start = time.perf_counter()
    report = _RUNNERS[name](**kwargs)
    report.seconds = time.perf_counter() - start
    return report
