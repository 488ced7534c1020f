"""Joint estimation of a signed interaction network and per-agent opinion update rules
from one observed trajectory."""

from .bandit import BanditConfig, JointEstimate, epsilon_greedy, epsilon_greedy_plus, random_search
from .dynamics import AgentRule, MixedModel, ModelGenConfig, RuleType, Trajectory, sample_model, simulate
from .graph import SignedGraph, generate_mixed_graph
from .learners import LearnerConfig, NeighborHints

__all__ = [
    "AgentRule", "BanditConfig", "JointEstimate", "LearnerConfig", "MixedModel", "ModelGenConfig",
    "NeighborHints", "RuleType", "SignedGraph", "Trajectory", "epsilon_greedy", "epsilon_greedy_plus",
    "generate_mixed_graph", "random_search", "sample_model", "simulate",
]

__version__ = "0.1.0"
