"""Graph definition files.

The on-disk format is JSON with two top-level keys:

``operators``
    list of objects: ``id`` (required), ``arity`` (``one_to_one`` |
    ``one_to_many``), ``per_edge_one_to_one``, ``uniqueness``, ``blocking``,
    ``worker_count``, ``partitioning`` (``hash`` | ``range`` | ``broadcast``),
    ``cost_ms``, optional ``is_source`` / ``is_sink`` (derived from edge
    degrees when omitted), optional ``function`` (``{"name": ..., "params":
    {...}}``, resolved against the built-in function registry).

``edges``
    list of ``[from, to]`` pairs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .model import Arity, DataflowGraph, GraphValidationError, OperatorMeta, Partitioning

FunctionSpecDict = dict[str, Any]


def graph_from_dict(doc: dict) -> tuple[DataflowGraph, dict[str, FunctionSpecDict]]:
    try:
        op_docs = doc["operators"]
        edge_docs = doc["edges"]
    except KeyError as exc:
        raise GraphValidationError(f"graph file missing key: {exc}") from None

    edges = [(str(a), str(b)) for a, b in edge_docs]
    with_in = {b for _, b in edges}
    with_out = {a for a, _ in edges}

    operators: dict[str, OperatorMeta] = {}
    functions: dict[str, FunctionSpecDict] = {}
    for od in op_docs:
        try:
            op_id = str(od["id"])
        except KeyError:
            raise GraphValidationError("operator entry without id") from None
        try:
            arity = Arity(od.get("arity", "one_to_one"))
            partitioning = Partitioning(od.get("partitioning", "hash"))
        except ValueError as exc:
            raise GraphValidationError(f"{op_id}: {exc}") from None
        operators[op_id] = OperatorMeta(
            arity=arity,
            per_edge_one_to_one=bool(od.get("per_edge_one_to_one", False)),
            uniqueness=bool(od.get("uniqueness", False)),
            blocking=bool(od.get("blocking", False)),
            is_source=bool(od.get("is_source", op_id not in with_in)),
            is_sink=bool(od.get("is_sink", op_id not in with_out)),
            worker_count=int(od.get("worker_count", 1)),
            partitioning=partitioning,
            cost_ms=float(od.get("cost_ms", 1.0)),
        )
        if "function" in od:
            functions[op_id] = dict(od["function"])
    return DataflowGraph(operators, edges), functions


def graph_to_dict(
    graph: DataflowGraph, functions: dict[str, FunctionSpecDict] | None = None
) -> dict:
    ops = []
    for op_id, meta in graph.operators.items():
        od: dict[str, Any] = {
            "id": op_id,
            "arity": meta.arity.value,
            "per_edge_one_to_one": meta.per_edge_one_to_one,
            "uniqueness": meta.uniqueness,
            "blocking": meta.blocking,
            "is_source": meta.is_source,
            "is_sink": meta.is_sink,
            "worker_count": meta.worker_count,
            "partitioning": meta.partitioning.value,
            "cost_ms": meta.cost_ms,
        }
        if functions and op_id in functions:
            od["function"] = functions[op_id]
        ops.append(od)
    return {"operators": ops, "edges": [list(e) for e in graph.edges]}


def load_graph(path: str | Path) -> tuple[DataflowGraph, dict[str, FunctionSpecDict]]:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def dump_graph(
    graph: DataflowGraph,
    path: str | Path,
    functions: dict[str, FunctionSpecDict] | None = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph, functions), fh, indent=2, sort_keys=False)
        fh.write("\n")
