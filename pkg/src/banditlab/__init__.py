"""ABE and baseline policies for stochastic bandits, with graph feedback and boosting."""

from banditlab.core import (
    BanditInstance,
    BernoulliEnvironment,
    FeedbackGraph,
    Observation,
    RandomSource,
    RegretTrace,
    draw_rewards,
    load_graph,
    neighbors,
    pseudo_regret_step,
)
from banditlab.abe import ABE, AbeParams
from banditlab.graph_abe import GraphABE

__all__ = [
    "ABE",
    "AbeParams",
    "BanditInstance",
    "BernoulliEnvironment",
    "FeedbackGraph",
    "GraphABE",
    "Observation",
    "RandomSource",
    "RegretTrace",
    "draw_rewards",
    "load_graph",
    "neighbors",
    "pseudo_regret_step",
]

__version__ = "0.1.0"
