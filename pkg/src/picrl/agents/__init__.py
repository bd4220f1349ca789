from picrl.agents.base import BaseAgent, derive_seed
from picrl.agents.dqn import DQN, EpsilonSchedule
from picrl.agents.losses import (
    LossResult,
    core_actor_loss,
    core_critic_loss,
    dqn_loss,
    mix_critic_loss,
    pic_loss,
)
from picrl.agents.nsac import NSAC
from picrl.agents.replay import Batch, ReplayBuffer
from picrl.agents.sac import DiscreteSAC

__all__ = [
    "BaseAgent",
    "Batch",
    "DQN",
    "DiscreteSAC",
    "EpsilonSchedule",
    "LossResult",
    "NSAC",
    "ReplayBuffer",
    "core_actor_loss",
    "core_critic_loss",
    "derive_seed",
    "dqn_loss",
    "mix_critic_loss",
    "pic_loss",
]
