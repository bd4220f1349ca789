"""Training runs, evaluation rollouts and CSV logging."""

from __future__ import annotations

import csv
import json
import math
import traceback
from pathlib import Path

import numpy as np

from picrl.agents import DQN, NSAC, DiscreteSAC
from picrl.envs import InconsistencyPenaltyWrapper, RepetitionWrapper, make_env
from picrl.harness.config import ExperimentConfig
from picrl.utils.validation import check_rng

CSV_FIELDS = ("env_step", "mean_return", "std_return", "oscillation_ratio", "mean_mu_pic",
              "loss_core_q", "loss_core_pi", "loss_mix_q", "loss_pic", "epsilon")
AGENTS = {"dqn": DQN, "sac": DiscreteSAC, "nsac": NSAC}


def build_env(config: ExperimentConfig, training: bool = True):
    """Base environment plus the wrapper implied by the algorithm suffix."""
    env = make_env(config.env, config.complexity, **config.env_params)
    if config.algo.endswith("-repeat"):
        gamma = config.agent_params.get("gamma", 0.99)
        env = RepetitionWrapper(env, config.repeats, gamma)
    elif config.algo.endswith("-ip"):
        env = InconsistencyPenaltyWrapper(env, config.penalty, training=training)
    return env


def build_agent(config: ExperimentConfig, seed: int):
    cls = AGENTS[config.algo.split("-")[0]]
    params = dict(config.agent_params)
    if "hidden" in params:
        params["hidden"] = tuple(params["hidden"])
    return cls(total_steps=config.total_steps, seed=seed, **params)


class SeedFailure(RuntimeError):
    """A seed aborted; ``rows`` ends with a NaN failure row at the step reached."""

    def __init__(self, rows, exc):
        super().__init__(f"seed aborted: {exc}")
        self.rows = rows


def evaluate(agent, env, n_episodes: int = 20, rng=None, mode: str = "sample"):
    """Roll out ``n_episodes`` without learning.

    Returns ``(mean_return, std_return, oscillation_ratio, mean_mu)``. Returns are
    undiscounted sums of per-step rewards; the oscillation ratio is the mean over
    episodes of each episode's switch fraction over the executed base actions.
    ``mean_mu`` averages the PIC weight over steps with a previous action (NaN
    for agents without one). The agent's parameters, buffer and RNG streams are
    left untouched.
    """
    rng = check_rng(rng)
    restore = None
    if isinstance(env, InconsistencyPenaltyWrapper):
        restore = env.training
        env.eval()
    returns, ratios, mus = [], [], []
    try:
        for _ in range(n_episodes):
            obs = env.reset(seed=int(rng.integers(2 ** 63)))
            prev, total, executed, done = None, 0.0, [], False
            while not done:
                action, mu = agent.act_with_info(obs, prev, rng, mode)
                if prev is not None and not math.isnan(mu):
                    mus.append(mu)
                obs, reward, done = env.step(action)
                total += reward
                executed.extend(env.last_executed)
                prev = action
            returns.append(total)
            ex = np.asarray(executed)
            ratios.append(float(np.mean(ex[1:] != ex[:-1])) if len(ex) > 1 else 0.0)
    finally:
        if restore is not None:
            env.train(restore)
    mean_mu = float(np.mean(mus)) if mus else float("nan")
    return float(np.mean(returns)), float(np.std(returns)), float(np.mean(ratios)), mean_mu


def eval_points(total_steps: int, interval: int) -> list:
    """Evaluation env-steps: every multiple of ``interval`` below the budget, or just 0."""
    return list(range(0, max(total_steps, 1), interval))


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(v)


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for row in rows:
            w.writerow([_fmt(row.get(k)) for k in CSV_FIELDS])


def read_csv(path) -> list:
    """Parse a metrics CSV; raises ValueError naming the first malformed row."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {header}")
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(CSV_FIELDS):
                raise ValueError(f"{path}: row {lineno} has {len(raw)} fields, expected {len(CSV_FIELDS)}")
            try:
                vals = [float(x) for x in raw]
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno} is malformed ({exc})") from None
            row = dict(zip(CSV_FIELDS, vals))
            row["env_step"] = int(row["env_step"])
            rows.append(row)
    return rows


def aggregate(per_seed: dict) -> list:
    """Mean and population std across seeds at each shared env_step."""
    steps = sorted(set.intersection(*(set(r["env_step"] for r in rows) for rows in per_seed.values())))
    out = []
    for step in steps:
        row = {"env_step": step}
        for key in CSV_FIELDS[1:]:
            vals = np.array([next(r[key] for r in rows if r["env_step"] == step) for rows in per_seed.values()])
            finite = vals[~np.isnan(vals)]
            row[f"{key}_mean"] = float(np.mean(finite)) if len(finite) else float("nan")
            row[f"{key}_std"] = float(np.std(finite)) if len(finite) else float("nan")
        out.append(row)
    return out


def write_aggregate(path, agg) -> None:
    keys = ["env_step"] + [f"{k}_{s}" for k in CSV_FIELDS[1:] for s in ("mean", "std")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in agg:
            w.writerow([_fmt(row[k]) for k in keys])


def run_seed(config: ExperimentConfig, seed: int, out_dir=None, progress=None) -> list:
    """Train one seed, evaluating on a separate env with its own RNG stream."""
    agent = build_agent(config, seed)
    train_env = build_env(config, training=True)
    eval_env = build_env(config, training=False)
    eval_rng = np.random.default_rng(config.eval_seed(seed))
    mode = "greedy" if config.algo.startswith("dqn") else config.eval_mode
    agent.initialize(train_env, env_seed=seed)
    rows = []
    try:
        _train_and_evaluate(config, agent, train_env, eval_env, eval_rng, mode, rows, seed, progress)
    except Exception as exc:
        rows.append({"env_step": getattr(agent, "env_steps_", 0)})
        raise SeedFailure(rows, exc) from exc
    if out_dir is not None and config.save_checkpoints:
        ckpt = Path(out_dir) / f"seed_{seed}.ckpt.json"
        agent.save(ckpt, include_buffer=config.save_buffer)
    return rows


def _train_and_evaluate(config, agent, train_env, eval_env, eval_rng, mode, rows, seed, progress):
    for step in eval_points(config.total_steps, config.eval_interval):
        agent.partial_fit(train_env, until=step)
        ret, std, osc, mu = evaluate(agent, eval_env, config.eval_episodes, eval_rng, mode)
        row = {"env_step": step, "mean_return": ret, "std_return": std, "oscillation_ratio": osc,
               "mean_mu_pic": mu}
        row.update(agent.loss_snapshot())
        rows.append(row)
        if progress:
            progress(seed, row)
    agent.partial_fit(train_env, until=config.total_steps)


def run_training(config: ExperimentConfig, progress=None) -> Path:
    """Train every seed, writing ``seed_<n>.csv``, ``aggregate.csv`` and ``config.json``.

    A seed that raises gets a failure row (NaN metrics at the step reached) and
    an entry in ``failures.json``; the other seeds still run.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.to_json(out / "config.json")
    per_seed, failures = {}, {}
    for seed in config.seed_list:
        try:
            rows = run_seed(config, seed, out, progress)
        except SeedFailure as failure:
            exc = failure.__cause__
            failures[seed] = "".join(traceback.format_exception_only(type(exc), exc)).strip()
            rows = failure.rows
        write_csv(out / f"seed_{seed}.csv", rows)
        if seed not in failures:
            per_seed[seed] = rows
    if failures:
        with open(out / "failures.json", "w") as fh:
            json.dump(failures, fh, indent=2)
    if per_seed:
        write_aggregate(out / "aggregate.csv", aggregate(per_seed))
    return out
