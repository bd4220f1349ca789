"""Policy inertia control for discrete-action reinforcement learning."""

from picrl.mdp import (
    AugmentedTabularPolicy,
    MdpSpec,
    TabularPolicy,
    Trajectory,
    ValueTables,
    discounted_return,
    exact_oscillation,
    exact_policy_evaluation,
    exact_return,
    garnet,
    oscillation_ratio_policy,
    oscillation_ratio_trajectory,
    sample_trajectory,
    validate_mdp,
)
from picrl.mixing import (
    MixedDistribution,
    PicWeight,
    apply_lower_bound,
    mix_distribution,
    mixed_log_prob_and_entropy,
    sample_mixed,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedTabularPolicy",
    "MdpSpec",
    "MixedDistribution",
    "PicWeight",
    "TabularPolicy",
    "Trajectory",
    "ValueTables",
    "apply_lower_bound",
    "discounted_return",
    "exact_oscillation",
    "exact_policy_evaluation",
    "exact_return",
    "garnet",
    "mix_distribution",
    "mixed_log_prob_and_entropy",
    "oscillation_ratio_policy",
    "oscillation_ratio_trajectory",
    "sample_mixed",
    "sample_trajectory",
    "validate_mdp",
]
