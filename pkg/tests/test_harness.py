import csv
import json
import math

import numpy as np
import pytest

from picrl.agents import NSAC, DiscreteSAC
from picrl.envs import InconsistencyPenaltyWrapper, make_env
from picrl.harness import cli
from picrl.harness.config import EVAL_SEED_OFFSET, ExperimentConfig
from picrl.harness.plots import curve, emit_plots, load_runs
from picrl.harness.training import (
    CSV_FIELDS,
    aggregate,
    build_agent,
    build_env,
    eval_points,
    evaluate,
    read_csv,
    run_seed,
    run_training,
    write_csv,
)
from picrl.harness.verify import SUITES, verify_suite

TINY = {"hidden": [8], "batch_size": 16}


def tiny_config(tmp_path, **kw):
    base = dict(algo="nsac", env="linetrack", seeds=2, total_steps=300, eval_interval=100, eval_episodes=2,
                agent_params=TINY, output_dir=str(tmp_path / "run"))
    base.update(kw)
    return ExperimentConfig(**base)


# -- config ---------------------------------------------------------------------------
def test_config_defaults():
    c = ExperimentConfig()
    assert (c.total_steps, c.eval_interval, c.eval_episodes, c.eval_mode) == (100_000, 5_000, 20, "sample")
    assert c.repeats == (1, 2, 4, 8) and c.penalty == -0.05
    assert c.eval_seed(3) == 3 + EVAL_SEED_OFFSET
    assert c.seed_list == [0, 1, 2, 3, 4]


def test_config_json_roundtrip_and_unknown_keys(tmp_path):
    c = ExperimentConfig(algo="sac-repeat", agent_params={"gamma": 0.9}, repeats=(1, 3))
    c.to_json(tmp_path / "c.json")
    assert ExperimentConfig.from_json(tmp_path / "c.json") == c
    with pytest.raises(ValueError, match="bogus"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_override_merges_dicts():
    c = ExperimentConfig(agent_params={"gamma": 0.9, "mu0": 0.1})
    d = c.override(agent_params={"mu0": 0.3}, seeds=None, total_steps=10)
    assert d.agent_params == {"gamma": 0.9, "mu0": 0.3} and d.seeds == 5 and d.total_steps == 10


@pytest.mark.parametrize("bad", [{"algo": "ppo"}, {"env": "pong"}, {"eval_mode": "x"}, {"eval_interval": 0},
                                 {"seeds": 0}, {"total_steps": -1}, {"complexity": "medium"}])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig(**bad)


def test_build_env_wrappers():
    assert build_env(ExperimentConfig(algo="dqn-repeat")).n_actions == 20
    env = build_env(ExperimentConfig(algo="sac-ip"), training=False)
    assert isinstance(env, InconsistencyPenaltyWrapper) and not env.training
    assert isinstance(build_agent(ExperimentConfig(algo="nsac-ip"), 0), NSAC)


# -- evaluation -----------------------------------------------------------------------
class ConstantAgent:
    def act_with_info(self, state, prev, rng, mode):
        return 1, float("nan")


class UniformAgent:
    def act_with_info(self, state, prev, rng, mode):
        return int(rng.integers(3)), 0.25


def test_evaluate_constant_agent_zero_oscillation():
    ret, std, osc, mu = evaluate(ConstantAgent(), make_env("linetrack"), 3, np.random.default_rng(0))
    assert osc == 0.0 and math.isnan(mu) and ret > 0


def test_evaluate_uniform_agent_two_thirds():
    _, _, osc, mu = evaluate(UniformAgent(), make_env("linetrack"), 20, np.random.default_rng(0))
    assert abs(osc - 2 / 3) < 0.03 and mu == 0.25


def test_evaluate_bypasses_penalty_and_restores_mode():
    env = InconsistencyPenaltyWrapper(make_env("linetrack", noise_std=0.0), -0.05)
    base = make_env("linetrack", noise_std=0.0)
    a = evaluate(UniformAgent(), env, 3, np.random.default_rng(1))
    b = evaluate(UniformAgent(), base, 3, np.random.default_rng(1))
    assert a == b and env.training


def _checksum(agent):
    parts = [p.tobytes() for n in agent.nets_.values() for p in n.params]
    parts += [getattr(agent.buffer_, f)[: len(agent.buffer_)].tobytes() for f in agent.buffer_.FIELDS]
    parts += [json.dumps(agent.act_rng_.bit_generator.state).encode(),
              json.dumps(agent.replay_rng_.bit_generator.state).encode()]
    return hash(b"".join(parts)), agent.env_steps_, agent.updates_


def test_evaluate_does_not_mutate_agent():
    env = make_env("linetrack")
    agent = NSAC(hidden=(8,), batch_size=16, seed=0).initialize(env)
    agent.partial_fit(env, until=100)
    before = _checksum(agent)
    evaluate(agent, make_env("linetrack"), 3, np.random.default_rng(0))
    assert _checksum(agent) == before


# -- CSV ---------------------------------------------------------------------------
def test_eval_points():
    assert eval_points(100_000, 5_000) == list(range(0, 100_000, 5_000))
    assert len(eval_points(100_000, 5_000)) == 20
    assert eval_points(0, 5_000) == [0]


def test_csv_roundtrip_lossless(tmp_path):
    rows = [{"env_step": 0, "mean_return": 0.1 + 0.2, "std_return": 1e-300, "oscillation_ratio": 1 / 3},
            {"env_step": 5, "mean_return": -2.5, "mean_mu_pic": float("nan"), "epsilon": 0.1}]
    write_csv(tmp_path / "s.csv", rows)
    with open(tmp_path / "s.csv") as fh:
        assert fh.readline().strip() == ",".join(CSV_FIELDS)
    back = read_csv(tmp_path / "s.csv")
    assert back[0]["mean_return"] == 0.1 + 0.2 and back[0]["oscillation_ratio"] == 1 / 3
    assert math.isnan(back[0]["loss_pic"]) and math.isnan(back[1]["mean_mu_pic"])


def test_csv_malformed_row_named(tmp_path):
    path = tmp_path / "seed_0.csv"
    write_csv(path, [{"env_step": 0}])
    with open(path, "a") as fh:
        fh.write("5,abc,1,1,1,1,1,1,1,1\n")
    with pytest.raises(ValueError, match="row 3"):
        read_csv(path)
    with pytest.raises(ValueError, match="row 3"):
        emit_plots(tmp_path)


# -- training runs ------------------------------------------------------------------
def test_zero_budget_gives_single_row(tmp_path):
    rows = run_seed(tiny_config(tmp_path, total_steps=0), 0)
    assert [r["env_step"] for r in rows] == [0]


def test_run_training_outputs_and_determinism(tmp_path):
    cfg = tiny_config(tmp_path)
    out = run_training(cfg)
    files = {p.name for p in out.iterdir()}
    assert {"config.json", "seed_0.csv", "seed_1.csv", "aggregate.csv", "seed_0.ckpt.json"} <= files
    rows = read_csv(out / "seed_0.csv")
    assert [r["env_step"] for r in rows] == [0, 100, 200]
    again = run_training(cfg.override(output_dir=str(tmp_path / "again")))
    for s in (0, 1):
        assert (out / f"seed_{s}.csv").read_text() == (again / f"seed_{s}.csv").read_text()


def test_aggregate_file_matches_recomputation(tmp_path):
    out = run_training(tiny_config(tmp_path))
    per_seed = {s: read_csv(out / f"seed_{s}.csv") for s in (0, 1)}
    with open(out / "aggregate.csv") as fh:
        stored = list(csv.DictReader(fh))
    for rec, row in zip(aggregate(per_seed), stored):
        for key, val in rec.items():
            x = float(row[key])
            assert (math.isnan(x) and math.isnan(val)) or abs(x - val) <= 1e-12
    vals = [per_seed[s][1]["mean_return"] for s in (0, 1)]
    assert float(stored[1]["mean_return_mean"]) == pytest.approx(np.mean(vals), abs=1e-12)


def test_failure_row_and_other_seeds_continue(tmp_path, monkeypatch):
    import picrl.harness.training as tr

    real = tr.build_agent

    def flaky(config, seed):
        agent = real(config, seed)
        if seed == 0:
            def boom(step):
                raise FloatingPointError("non-finite test loss")
            agent._update = boom
        return agent

    monkeypatch.setattr(tr, "build_agent", flaky)
    out = run_training(tiny_config(tmp_path))
    failures = json.loads((out / "failures.json").read_text())
    assert "0" in failures and "non-finite" in failures["0"]
    rows = read_csv(out / "seed_0.csv")
    assert math.isnan(rows[-1]["mean_return"]) and rows[-1]["env_step"] > 0
    assert (out / "aggregate.csv").exists() and len(read_csv(out / "seed_1.csv")) == 3


def test_checkpoint_evaluates_like_live_agent(tmp_path):
    cfg = tiny_config(tmp_path, seeds=1)
    out = run_training(cfg)
    agent = NSAC.load(out / "seed_0.ckpt.json")
    assert agent.env_steps_ >= 300
    res = evaluate(agent, make_env("linetrack"), 2, np.random.default_rng(0))
    assert all(np.isfinite(res[:3]))


# -- plots --------------------------------------------------------------------------
def test_single_seed_band_collapses(tmp_path):
    write_csv(tmp_path / "seed_0.csv", [{"env_step": 0, "mean_return": 1.0}, {"env_step": 10, "mean_return": 2.0}])
    steps, mean, half = curve(load_runs(tmp_path), "mean_return")
    np.testing.assert_array_equal(half, 0.0)
    np.testing.assert_array_equal(mean, [1.0, 2.0])


def test_two_metrics_two_svgs_and_half_std_band(tmp_path):
    write_csv(tmp_path / "seed_0.csv", [{"env_step": 0, "mean_return": 1.0, "oscillation_ratio": 0.2}])
    write_csv(tmp_path / "seed_1.csv", [{"env_step": 0, "mean_return": 3.0, "oscillation_ratio": 0.4}])
    paths = emit_plots(tmp_path)
    assert sorted(p.name for p in paths) == ["mean_return.svg", "oscillation_ratio.svg"]
    assert all(p.read_text().lstrip().startswith("<?xml") for p in paths)
    with open(tmp_path / "mean_return.plot.csv") as fh:
        row = list(csv.DictReader(fh))[0]
    assert float(row["mean"]) == 2.0 and float(row["upper"]) == 2.5


def test_plots_need_logs(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plots(tmp_path)


# -- verify and CLI -----------------------------------------------------------------
def test_verify_unknown_suite():
    with pytest.raises(ValueError):
        verify_suite("nope")
    assert {"tabular", "gradcheck", "reduction", "theorem1", "lemma1", "npi-monotone"} <= set(SUITES)


def test_cli_train_plot_evaluate(tmp_path, capsys):
    out = tmp_path / "cli"
    code = cli.main(["train", "--algo", "sac", "--env", "linetrack", "--seeds", "1", "--total-steps", "200",
                     "--eval-interval", "100", "--eval-episodes", "2", "--set", "hidden=[8]",
                     "--set", "batch_size=16", "--output-dir", str(out), "--quiet"])
    assert code == 0 and (out / "seed_0.csv").exists()
    assert cli.main(["plot", str(out), "--metrics", "mean_return"]) == 0
    assert (out / "mean_return.svg").exists()
    capsys.readouterr()
    assert cli.main(["evaluate", str(out / "seed_0.ckpt.json"), "--env", "linetrack", "--eval-episodes", "2"]) == 0
    assert "oscillation_ratio" in json.loads(capsys.readouterr().out)


def test_cli_config_file_with_flag_override(tmp_path):
    cfg = tiny_config(tmp_path, seeds=1, total_steps=100, algo="dqn")
    cfg.to_json(tmp_path / "cfg.json")
    out = tmp_path / "override"
    assert cli.main(["train", "--config", str(tmp_path / "cfg.json"), "--output-dir", str(out),
                     "--total-steps", "0", "--quiet"]) == 0
    assert [r["env_step"] for r in read_csv(out / "seed_0.csv")] == [0]
    saved = json.loads((out / "config.json").read_text())
    assert saved["algo"] == "dqn" and saved["total_steps"] == 0


def test_cli_sweep(tmp_path):
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--algo", "nsac", "--env", "linetrack", "--seeds", "1", "--total-steps", "0",
                     "--eval-episodes", "1", "--set", "hidden=[8]", "--grid", "mu0=0.0,0.5",
                     "--output-dir", str(out), "--quiet"]) == 0
    assert len(list(out.rglob("seed_0.csv"))) == 2


def test_cli_error_exit_codes(tmp_path):
    assert cli.main(["train", "--env", "linetrack", "--eval-interval", "0", "--output-dir", str(tmp_path)]) == 2
    assert cli.main(["plot", str(tmp_path / "missing")]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["train", "--env", "pong"])
    assert info.value.code == 2


def test_cli_verify_baselines(capsys):
    assert cli.main(["verify", "baselines"]) == 0
    assert "[PASS] baselines" in capsys.readouterr().out
