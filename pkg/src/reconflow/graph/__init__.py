from .model import (
    Arity,
    DataflowGraph,
    Edge,
    GraphValidationError,
    OperatorId,
    OperatorMeta,
    Partitioning,
)
from .mcs import Component, Mcs, VisitCounter, find_components, find_mcs
from .parallel import expand_parallel, expand_targets, worker_id, workers_of
from .reconfig_set import extend_reconfig_set, prune_ancestors
from .schema import dump_graph, graph_from_dict, graph_to_dict, load_graph
from .segment import Segment, segment_by_blocking, segment_for_operators

__all__ = [
    "Arity",
    "Component",
    "DataflowGraph",
    "Edge",
    "GraphValidationError",
    "Mcs",
    "OperatorId",
    "OperatorMeta",
    "Partitioning",
    "Segment",
    "VisitCounter",
    "dump_graph",
    "expand_parallel",
    "expand_targets",
    "extend_reconfig_set",
    "find_components",
    "find_mcs",
    "graph_from_dict",
    "graph_to_dict",
    "load_graph",
    "prune_ancestors",
    "segment_by_blocking",
    "segment_for_operators",
    "worker_id",
    "workers_of",
]
