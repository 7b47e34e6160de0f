"""Planner library and simulation harness for navigation among spatially
correlated, ambiguously blocked disk obstacles."""

__version__ = "0.1.0"

from .belief import BeliefState, Kernel, kernel_matrix, posterior, to_probabilities
from .decisions import DecisionSet, identify_decisions, prune_search_space
from .generate import ScenarioSpec, build_replicates, build_world
from .rollout import EpisodeTrace, RolloutConfig, execute_episode, rollout_decide
from .sensor import Observation, SensorModel
from .world import LatticeWorld, Obstacle, edge_blocked, pseudo_vertex_bound, shortest_path

__all__ = [
    "BeliefState", "Kernel", "kernel_matrix", "posterior", "to_probabilities",
    "DecisionSet", "identify_decisions", "prune_search_space",
    "ScenarioSpec", "build_replicates", "build_world",
    "EpisodeTrace", "RolloutConfig", "execute_episode", "rollout_decide",
    "Observation", "SensorModel",
    "LatticeWorld", "Obstacle", "edge_blocked", "pseudo_vertex_bound", "shortest_path",
]
