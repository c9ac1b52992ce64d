"""Adaptive graph-neural-network backstepping control of a target steered
by a team of influencer agents."""

from ._backend import BACKEND
from .controller import Gains
from .gnn import GnnConfig
from .graph import Graph, build_graph, complete_graph
from .sim import ScenarioConfig, paper_scenario, run

__all__ = ["BACKEND", "Gains", "GnnConfig", "Graph", "ScenarioConfig", "build_graph",
           "complete_graph", "paper_scenario", "run"]
__version__ = "0.1.0"
