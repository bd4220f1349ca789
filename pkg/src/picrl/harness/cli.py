"""Command-line entry point: ``picrl {train,evaluate,verify,gradcheck,plot,sweep}``."""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from picrl.harness.config import ALGOS, ENVS, ExperimentConfig
from picrl.harness.verify import SUITES, verify_suite


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_assignments(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"expected key=value, got {item!r}")
        out[key] = _parse_value(value)
    return out


def _add_experiment_args(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--env", choices=ENVS)
    p.add_argument("--complexity", choices=("simple", "complex"))
    p.add_argument("--seeds", type=int)
    p.add_argument("--first-seed", type=int)
    p.add_argument("--total-steps", type=int)
    p.add_argument("--eval-interval", type=int)
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--eval-mode", choices=("sample", "greedy"))
    p.add_argument("--output-dir")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="agent hyperparameter override")
    p.add_argument("--env-set", action="append", metavar="KEY=VALUE", help="environment config override")


def _config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    return base.override(
        algo=args.algo, env=args.env, complexity=args.complexity, seeds=args.seeds,
        first_seed=args.first_seed, total_steps=args.total_steps, eval_interval=args.eval_interval,
        eval_episodes=args.eval_episodes, eval_mode=args.eval_mode, output_dir=args.output_dir,
        agent_params=_parse_assignments(args.set) or None, env_params=_parse_assignments(args.env_set) or None,
    )


def _print_row(seed, row):
    print(f"seed {seed} step {row['env_step']:>7d}  return {row['mean_return']:8.3f}  "
          f"oscillation {row['oscillation_ratio']:.3f}  mu {row['mean_mu_pic']:.3f}", flush=True)


def cmd_train(args) -> int:
    from picrl.harness.training import run_training

    config = _config_from_args(args)
    out = run_training(config, progress=None if args.quiet else _print_row)
    failed = (out / "failures.json").exists()
    print(f"logs written to {out}" + (" (some seeds failed, see failures.json)" if failed else ""))
    return 1 if failed else 0


def cmd_sweep(args) -> int:
    from picrl.harness.training import run_training

    base = _config_from_args(args)
    grid = {}
    for item in args.grid:
        key, _, values = item.partition("=")
        grid[key] = [_parse_value(v) for v in values.split(",")]
    status = 0
    for combo in itertools.product(*grid.values()):
        params = dict(zip(grid, combo))
        tag = "_".join(f"{k}={v}" for k, v in params.items())
        config = base.override(agent_params=params, output_dir=str(Path(base.output_dir) / tag))
        print(f"== {tag}")
        out = run_training(config, progress=None if args.quiet else _print_row)
        status |= int((out / "failures.json").exists())
    return status


def cmd_evaluate(args) -> int:
    from picrl.agents import DQN, NSAC, DiscreteSAC
    from picrl.harness.training import build_env, evaluate

    with open(args.checkpoint) as fh:
        cls_name = json.load(fh)["class"]
    cls = {"DQN": DQN, "NSAC": NSAC, "DiscreteSAC": DiscreteSAC}[cls_name]
    agent = cls.load(args.checkpoint)
    config = _config_from_args(args)
    env = build_env(config, training=False)
    mode = "greedy" if cls is DQN else config.eval_mode
    ret, std, osc, mu = evaluate(agent, env, config.eval_episodes, np.random.default_rng(args.seed), mode)
    print(json.dumps({"mean_return": ret, "std_return": std, "oscillation_ratio": osc, "mean_mu_pic": mu}))
    return 0


def cmd_verify(args) -> int:
    names = SUITES if "all" in args.suites else args.suites
    ok = True
    for name in names:
        report = verify_suite(name)
        print(report.summary())
        for line in report.lines:
            print(f"    {line}")
        ok &= report.passed
    return 0 if ok else 1


def cmd_plot(args) -> int:
    from picrl.harness.plots import emit_plots

    for path in emit_plots(args.log_dir, args.metrics, args.band, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one algorithm over several seeds")
    _add_experiment_args(p)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train over the cartesian product of agent hyperparameters")
    _add_experiment_args(p)
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="evaluate a saved agent checkpoint")
    _add_experiment_args(p)
    p.add_argument("checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="run property suites against independent oracles")
    p.add_argument("suites", nargs="*", default=["all"], choices=(*SUITES, "all"))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gradcheck", help="alias of 'verify gradcheck'")
    p.set_defaults(func=cmd_verify, suites=["gradcheck"])

    p = sub.add_parser("plot", help="emit SVG curves from a log directory")
    p.add_argument("log_dir")
    p.add_argument("--metrics", nargs="+", default=["oscillation_ratio", "mean_return"])
    p.add_argument("--band", type=float, default=0.5, help="band half-width in standard deviations")
    p.add_argument("--out", help="output directory (default: the log directory)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
