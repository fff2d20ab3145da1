"""Context-aware sparse coordination graphs for tabular multi-agent Q-learning."""

from .errors import CapacityError, ConfigError, InvalidArgument, NumericFailure
from .graph import CoordinationGraph, FactorGraph, build_complete_graph, empty_graph, to_factor_graph
from .maxsum import exact_joint_argmax, evaluate_q_tot, run_max_sum
from .sparsify import TopologyCriterion, edge_budget, select_topology
from .values import ObsKey, ValueTables

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "InvalidArgument",
    "NumericFailure",
    "CoordinationGraph",
    "FactorGraph",
    "build_complete_graph",
    "empty_graph",
    "to_factor_graph",
    "run_max_sum",
    "evaluate_q_tot",
    "exact_joint_argmax",
    "TopologyCriterion",
    "edge_budget",
    "select_topology",
    "ObsKey",
    "ValueTables",
]
