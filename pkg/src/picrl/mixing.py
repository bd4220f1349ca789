"""Mixed (PIC-augmented) distributions: a Dirac on the previous action blended with a core."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from picrl.mdp import LOG_FLOOR, AugmentedTabularPolicy, TabularPolicy, _draw
from picrl.utils.validation import check_rng, check_stochastic, check_unit_interval


@dataclass(frozen=True)
class PicWeight:
    """Inertia weight ``value`` in ``[mu0, 1]``."""

    value: float
    mu0: float = 0.0

    def __post_init__(self):
        check_unit_interval(self.mu0, "mu0")
        check_unit_interval(self.value, "mu")
        if self.value < self.mu0:
            raise ValueError(f"mu={self.value} is below its lower bound mu0={self.mu0}")


@dataclass(frozen=True, eq=False)
class MixedDistribution:
    probs: np.ndarray
    core: np.ndarray
    prev_action: Optional[int]


def apply_lower_bound(raw: float, mu0: float) -> PicWeight:
    """Rescale a raw weight in [0, 1] onto [mu0, 1]."""
    check_unit_interval(mu0, "mu0")
    check_unit_interval(raw, "raw weight")
    return PicWeight(min(1.0, mu0 + (1.0 - mu0) * raw), mu0)


def tanh_to_unit(x):
    """Map a tanh output in [-1, 1] onto [0, 1]."""
    return (np.tanh(x) + 1.0) / 2.0 if not np.isscalar(x) else (float(np.tanh(x)) + 1.0) / 2.0


def mix_distribution(core, prev_action: Optional[int], mu) -> MixedDistribution:
    """``mu * onehot(prev_action) + (1 - mu) * core``; a null ``prev_action`` returns the core."""
    core = check_stochastic(core, "core distribution")
    mu_value = mu.value if isinstance(mu, PicWeight) else check_unit_interval(mu, "mu")
    if prev_action is None:
        return MixedDistribution(core.copy(), core, None)
    prev_action = int(prev_action)
    if not 0 <= prev_action < len(core):
        raise ValueError(f"prev_action {prev_action} outside [0, {len(core)})")
    probs = (1.0 - mu_value) * core
    probs[prev_action] += mu_value
    return MixedDistribution(probs, core, prev_action)


def sample_mixed(dist: MixedDistribution, rng=None) -> int:
    return _draw(dist.probs, check_rng(rng))


def mixed_log_prob_and_entropy(dist) -> tuple[np.ndarray, float]:
    """Floored log-probabilities and the entropy of a (mixed) distribution."""
    p = np.asarray(dist.probs if isinstance(dist, MixedDistribution) else dist, dtype=float)
    logp = np.log(np.maximum(p, LOG_FLOOR))
    return logp, float(-np.sum(p * logp))


def mixed_policy_table(core: TabularPolicy, mu_table) -> AugmentedTabularPolicy:
    """Tabular mixed policy from a core and per-(state, prev_action) weights.

    ``mu_table`` has shape (S, A + 1) or is a scalar; the null column is ignored.
    """
    pc = core.probs
    S, A = pc.shape
    mu = np.broadcast_to(np.asarray(mu_table, dtype=float), (S, A + 1)).copy()
    if np.any(mu < 0) or np.any(mu > 1):
        raise ValueError("mu table entries must lie in [0, 1]")
    mu[:, A] = 0.0
    probs = (1.0 - mu)[:, :, None] * pc[:, None, :]
    idx = np.arange(A)
    probs[:, idx, idx] += mu[:, :A]
    return AugmentedTabularPolicy(probs)
