from __future__ import annotations

from reconflow.graph import Arity, DataflowGraph, OperatorMeta


def op(
    *,
    source: bool = False,
    sink: bool = False,
    one_to_many: bool = False,
    per_edge_one_to_one: bool = False,
    uniqueness: bool = False,
    blocking: bool = False,
    workers: int = 1,
    cost_ms: float = 1.0,
) -> OperatorMeta:
    """Shorthand for operator metadata in test graphs."""
    return OperatorMeta(
        arity=Arity.ONE_TO_MANY if one_to_many else Arity.ONE_TO_ONE,
        per_edge_one_to_one=per_edge_one_to_one,
        uniqueness=uniqueness,
        blocking=blocking,
        is_source=source,
        is_sink=sink,
        worker_count=workers,
        cost_ms=cost_ms,
    )


def chain_graph(*names: str) -> DataflowGraph:
    """Linear pipeline: first operator is the source, last is the sink."""
    operators = {
        name: op(source=(i == 0), sink=(i == len(names) - 1))
        for i, name in enumerate(names)
    }
    edges = [(names[i], names[i + 1]) for i in range(len(names) - 1)]
    return DataflowGraph(operators, edges)
