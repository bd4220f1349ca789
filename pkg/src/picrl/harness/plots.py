"""SVG learning curves (mean line with a shaded band over seeds) and plot-data files."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from picrl.harness.training import read_csv  # noqa: E402

DEFAULT_METRICS = ("oscillation_ratio", "mean_return")


def load_runs(log_dir) -> dict:
    """Map seed file stem -> parsed rows for every ``seed_*.csv`` in ``log_dir``."""
    paths = sorted(Path(log_dir).glob("seed_*.csv"))
    if not paths:
        raise FileNotFoundError(f"no seed_*.csv files in {log_dir}")
    return {p.stem: read_csv(p) for p in paths}


def curve(runs: dict, metric: str, band: float = 0.5):
    """Steps present in every run, with the across-seed mean and ``band * std``."""
    steps = sorted(set.intersection(*(set(r["env_step"] for r in rows) for rows in runs.values())))
    vals = np.array([[next(r[metric] for r in rows if r["env_step"] == s) for s in steps]
                     for rows in runs.values()])
    mean = np.nanmean(vals, axis=0) if vals.size else np.array([])
    std = np.nanstd(vals, axis=0) if vals.size else np.array([])
    return np.array(steps), mean, band * std


def emit_plots(log_dir, metrics=DEFAULT_METRICS, band: float = 0.5, out_dir=None) -> list:
    """Write ``<metric>.svg`` and ``<metric>.plot.csv`` per metric; returns the SVG paths."""
    runs = load_runs(log_dir)
    out = Path(out_dir or log_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in metrics:
        steps, mean, half = curve(runs, metric, band)
        with open(out / f"{metric}.plot.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["env_step", "mean", "lower", "upper"])
            for row in zip(steps, mean, mean - half, mean + half):
                w.writerow([repr(float(x)) for x in row])
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(steps, mean, lw=1.5)
        ax.fill_between(steps, mean - half, mean + half, alpha=0.25, lw=0)
        ax.set_xlabel("environment steps")
        ax.set_ylabel(metric.replace("_", " "))
        ax.set_title(f"{Path(log_dir).name} ({len(runs)} seeds, band {band:g} std)", fontsize=9)
        fig.tight_layout()
        path = out / f"{metric}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written
