from picrl.envs.base import Env, EpisodeOverError
from picrl.envs.linetrack import LineTrack, LineTrackConfig, linetrack_step
from picrl.envs.twoway import TwoWayMini, TwoWayMiniConfig, state_vector, twoway_step
from picrl.envs.wrappers import (
    InconsistencyPenaltyWrapper,
    RepetitionActionSpace,
    RepetitionWrapper,
)


def make_env(name: str, complexity: str = "simple", **overrides) -> Env:
    """Build an environment by CLI name (``linetrack`` or ``twoway-mini``)."""
    if name == "linetrack":
        return LineTrack(LineTrackConfig(**overrides))
    if name == "twoway-mini":
        return TwoWayMini(TwoWayMiniConfig.preset(complexity, **overrides))
    raise ValueError(f"unknown environment {name!r}")


__all__ = [
    "Env",
    "EpisodeOverError",
    "InconsistencyPenaltyWrapper",
    "LineTrack",
    "LineTrackConfig",
    "RepetitionActionSpace",
    "RepetitionWrapper",
    "TwoWayMini",
    "TwoWayMiniConfig",
    "linetrack_step",
    "make_env",
    "state_vector",
    "twoway_step",
]
