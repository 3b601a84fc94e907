"""Worker-level expansion of operator graphs.

The engine executes worker vertices, one per parallel instance of each
operator.  ``expand_parallel`` turns an operator graph into that worker
graph: hash and range partitioned edges become full bipartite channel sets,
broadcast edges route through a synthetic replicate vertex that copies each
tuple to every receiver worker.

Operators with ``worker_count == 1`` keep their id, so a graph whose
operators are all single-worker expands to itself.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable

from .model import (
    Arity,
    DataflowGraph,
    Edge,
    OperatorId,
    OperatorMeta,
    Partitioning,
)

REPLICATE_COST_MS = 0.0


def worker_id(op: OperatorId, index: int, worker_count: int) -> OperatorId:
    return op if worker_count == 1 else f"{op}@{index}"


def expand_parallel(graph: DataflowGraph) -> DataflowGraph:
    """Expands every operator into its worker vertices."""
    vertices: dict[OperatorId, OperatorMeta] = {}
    edges: list[Edge] = []

    for op, meta in graph.operators.items():
        for i in range(meta.worker_count):
            vertices[worker_id(op, i, meta.worker_count)] = replace(
                meta,
                worker_count=1,
                logical_id=meta.logical(op),
                worker_index=i,
            )

    for a, b in graph.edges:
        meta_a, meta_b = graph.meta(a), graph.meta(b)
        senders = [worker_id(a, i, meta_a.worker_count) for i in range(meta_a.worker_count)]
        receivers = [worker_id(b, j, meta_b.worker_count) for j in range(meta_b.worker_count)]
        if meta_a.partitioning is Partitioning.BROADCAST and len(receivers) > 1:
            for s in senders:
                rep = f"{s}>>{b}"
                vertices[rep] = OperatorMeta(
                    arity=Arity.ONE_TO_MANY,
                    per_edge_one_to_one=True,
                    worker_count=1,
                    partitioning=Partitioning.HASH,
                    cost_ms=REPLICATE_COST_MS,
                    logical_id=rep,
                    synthetic_replicate=True,
                )
                edges.append((s, rep))
                edges.extend((rep, r) for r in receivers)
        else:
            edges.extend((s, r) for s in senders for r in receivers)

    return DataflowGraph(vertices, edges)


def workers_of(expanded: DataflowGraph, op: OperatorId) -> tuple[OperatorId, ...]:
    """Worker vertices of a logical operator, in worker-index order."""
    found = [
        (meta.worker_index, w)
        for w, meta in expanded.operators.items()
        if meta.logical(w) == op and not meta.synthetic_replicate
    ]
    if not found:
        raise KeyError(f"no workers for operator {op}")
    return tuple(w for _, w in sorted(found))


def expand_targets(
    expanded: DataflowGraph, ops: Iterable[OperatorId]
) -> frozenset[OperatorId]:
    """Maps logical operator ids to the full set of their worker vertices."""
    out: set[OperatorId] = set()
    for op in ops:
        out.update(workers_of(expanded, op))
    return frozenset(out)
