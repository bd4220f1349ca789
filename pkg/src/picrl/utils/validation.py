"""Input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np

from picrl.exceptions import MdpValidationError

PROB_ATOL = 1e-12


def check_rng(seed=None) -> np.random.Generator:
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Accepts None, an int, a SeedSequence or an existing Generator (returned as is).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a Generator from {type(seed).__name__}")


def check_stochastic(arr, name: str, atol: float = PROB_ATOL) -> np.ndarray:
    """Validate that the last axis of ``arr`` holds probability vectors.

    Raises MdpValidationError naming the first offending row and its deviation.
    """
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise MdpValidationError(f"{name}{list(idx)} is not finite")
    if np.any(arr < 0):
        idx = tuple(int(i) for i in np.argwhere(arr < 0)[0])
        raise MdpValidationError(f"{name}{list(idx)} = {arr[idx]!r} is negative")
    dev = np.abs(arr.sum(axis=-1) - 1.0)
    if np.any(dev > atol):
        idx = tuple(int(i) for i in np.argwhere(dev > atol)[0])
        raise MdpValidationError(
            f"{name} row {list(idx)} sums to {arr[idx].sum()!r} "
            f"(deviation {dev[idx]:.3e} > {atol:g})"
        )
    return arr


def check_unit_interval(value, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_state_batch(states, state_dim: int) -> np.ndarray:
    """Coerce a single state or a batch of states to a 2-D float array."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[None, :]
    if states.ndim != 2 or states.shape[1] != state_dim:
        raise ValueError(f"expected states with {state_dim} features, got shape {states.shape}")
    if not np.all(np.isfinite(states)):
        raise ValueError("states contain non-finite values")
    return states
