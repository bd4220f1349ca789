"""Acceptance criteria A1-A9.

Each test records one PASS/FAIL line; the lines are printed together at the end
of the pytest session (see conftest.py) and when this file is run directly.
A5 trains NSAC and SAC for 100 000 environment steps on five seeds each and is
marked ``slow`` (about 40 minutes on one core).
"""

import os
import statistics
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from picrl.agents import NSAC, DiscreteSAC
from picrl.envs import InconsistencyPenaltyWrapper, RepetitionWrapper, make_env
from picrl.harness.config import ExperimentConfig
from picrl.harness.training import build_env, evaluate, run_training
from picrl.harness.verify import gradcheck_problem, verify_suite
from picrl.mdp import oscillation_ratio_trajectory
from picrl.agents.losses import pic_loss
from picrl.nn import Optimizer

RESULTS: dict = {}


def record(key, title, passed, detail):
    line = f"{key} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    RESULTS[key] = line
    print(line)
    return passed


def run_suite(name, **kw):
    report = verify_suite(name, **kw)
    return report, "; ".join(report.lines)


def test_a1_tabular_correctness():
    report, detail = run_suite("tabular", n_mdps=20, tol=1e-6, alphas=(0.0, 0.1))
    ok = report.passed and report.seconds < 10
    assert record("A1", "tabular correctness", ok, f"{detail} ({report.seconds:.1f}s, limit 10s)")


def test_a2_metric_exactness():
    start = time.perf_counter()
    canon = [oscillation_ratio_trajectory(s) for s in ([0, 0, 0], [0, 1, 0, 1], [0, 0, 1, 1, 0])]
    report, detail = run_suite("metrics", n_policies=10, z=3.0)
    secs = time.perf_counter() - start
    ok = canon == [0.0, 1.0, 0.5] and report.passed and secs < 5
    assert record("A2", "metric exactness", ok, f"canonical {canon}; {detail} ({secs:.1f}s, limit 5s)")


def test_a3_npi_monotonicity():
    mono, d1 = run_suite("npi-monotone", n_seeds=20, tol=1e-8, n_factor=8.0)
    lemma, d2 = run_suite("lemma1", n_factor=8.0, slack=1e-8)
    secs = mono.seconds + lemma.seconds
    ok = mono.passed and lemma.passed and secs < 60
    assert record("A3", "NPI monotonicity", ok, f"{d1}; lemma boundary: {d2} ({secs:.1f}s, limit 60s)")


def test_a4_theorem1_witness():
    report, detail = run_suite("theorem1", n_mdps=100, xi_tol=1e-12, j_tol=1e-9)
    ok = report.passed and report.seconds < 120
    assert record("A4", "Theorem 1 witness", ok, f"{detail} ({report.seconds:.1f}s, limit 120s)")


def _a5_root():
    root = os.environ.get("PICRL_A5_DIR")
    return Path(root) if root else Path(tempfile.mkdtemp(prefix="picrl_a5_"))


def _final_checkpoint_metrics(cfg, out):
    """Evaluate each seed's saved 100k-step agent with that seed's evaluation stream."""
    cls = {"nsac": NSAC, "sac": DiscreteSAC}[cfg.algo]
    osc, ret = [], []
    for seed in cfg.seed_list:
        agent = cls.load(out / f"seed_{seed}.ckpt.json")
        env = build_env(cfg, training=False)
        r, _, x, _ = evaluate(agent, env, cfg.eval_episodes, np.random.default_rng(cfg.eval_seed(seed)), cfg.eval_mode)
        osc.append(x)
        ret.append(r)
    return osc, ret


@pytest.mark.slow
def test_a5_desk_scale_trend():
    root = _a5_root()
    stats, per_seed_secs = {}, {}
    for algo in ("nsac", "sac"):
        cfg = ExperimentConfig(algo=algo, env="twoway-mini", complexity="complex", seeds=5, total_steps=100_000,
                               eval_interval=5_000, eval_episodes=20, output_dir=str(root / algo))
        start = time.perf_counter()
        out = run_training(cfg)
        per_seed_secs[algo] = (time.perf_counter() - start) / cfg.seeds
        stats[algo] = _final_checkpoint_metrics(cfg, out)
    osc_n, ret_n = (statistics.median(v) for v in stats["nsac"])
    osc_s, ret_s = (statistics.median(v) for v in stats["sac"])
    osc_ok = osc_n <= 0.7 * osc_s
    ret_ok = ret_n >= 0.9 * ret_s
    time_ok = max(per_seed_secs.values()) < 30 * 60
    detail = (f"median oscillation NSAC {osc_n:.3f} vs SAC {osc_s:.3f} (need <= {0.7 * osc_s:.3f}); "
              f"median return NSAC {ret_n:.2f} vs SAC {ret_s:.2f} (need >= {0.9 * ret_s:.2f}); "
              f"per-seed oscillation NSAC {[round(x, 3) for x in stats['nsac'][0]]}, "
              f"SAC {[round(x, 3) for x in stats['sac'][0]]}; "
              f"{per_seed_secs['nsac']:.0f}s/{per_seed_secs['sac']:.0f}s per seed; logs in {root}")
    assert record("A5", "desk-scale trend", osc_ok and ret_ok and time_ok, detail)


def test_a6_gradient_fidelity():
    start = time.perf_counter()
    report, detail = run_suite("gradcheck", tol=1e-4, h=1e-5)
    # stop-gradient: a PIC update leaves every other network bitwise unchanged
    nets, batch = gradcheck_problem(2)
    frozen = {k: [p.copy() for p in n.params] for k, n in nets.items() if k != "pic"}
    res = pic_loss(nets["pic"], nets["actor"], (nets["mq1"], nets["mq2"]), batch, 0.05, 3)
    Optimizer(nets["pic"], 1e-2).step(res.grads["pic"])
    untouched = all(np.array_equal(a, b) for k, ps in frozen.items() for a, b in zip(ps, nets[k].params))
    stop_ok = set(res.grads) == {"pic"} and untouched
    secs = time.perf_counter() - start
    ok = report.passed and stop_ok and secs < 30
    assert record("A6", "gradient fidelity", ok,
                  f"worst rel err {report.worst:.2e}; pic stop-gradient {'ok' if stop_ok else 'VIOLATED'} "
                  f"({secs:.1f}s, limit 30s)")


def test_a7_reduction_identity():
    report, detail = run_suite("reduction", n_updates=1000)
    ok = report.passed and report.seconds < 60
    assert record("A7", "reduction identity", ok, f"{detail} ({report.seconds:.1f}s, limit 60s)")


def test_a8_baseline_semantics():
    start = time.perf_counter()
    report, detail = run_suite("baselines")
    wrapped = build_env(ExperimentConfig(algo="dqn-repeat", env="twoway-mini"))
    rep_ok = isinstance(wrapped, RepetitionWrapper) and wrapped.n_actions == 20
    base = make_env("twoway-mini", "simple")
    pen = InconsistencyPenaltyWrapper(make_env("twoway-mini", "simple"), -0.05)
    base.reset(seed=4)
    pen.reset(seed=4)
    diffs = []
    for a in (0, 3, 3, 4, 0, 0, 4):
        _, r0, d0 = base.step(a)
        _, r1, _ = pen.step(a)
        diffs.append(round(r0 - r1, 12))
        if d0:
            break
    pen_ok = diffs == [0.0, 0.05, 0.0, 0.05, 0.05, 0.0, 0.05][: len(diffs)]
    secs = time.perf_counter() - start
    ok = report.passed and rep_ok and pen_ok and secs < 5
    assert record("A8", "baseline semantics", ok,
                  f"{detail}; TwoWayMini repeat actions {wrapped.n_actions}; penalty diffs {diffs} ({secs:.1f}s, limit 5s)")


def test_a9_ablation_directionality():
    report, detail = run_suite("ablation", mu0_values=(0.0, 0.2, 0.4, 0.6))
    ok = report.passed and report.seconds < 60
    assert record("A9", "ablation directionality", ok, f"{detail} ({report.seconds:.1f}s, limit 60s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", *sys.argv[1:]]))
