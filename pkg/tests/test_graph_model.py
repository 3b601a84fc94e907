from __future__ import annotations

import pytest

from reconflow.graph import DataflowGraph, GraphValidationError

from conftest import chain_graph, op


def test_chain_topological_order():
    g = chain_graph("S", "A", "B", "K")
    assert g.topological_order() == ("S", "A", "B", "K")
    assert g.sources() == ("S",)
    assert g.sinks() == ("K",)


def test_topological_ties_resolve_by_id():
    g = DataflowGraph(
        {
            "S": op(source=True),
            "b": op(),
            "a": op(),
            "K": op(sink=True),
        },
        [("S", "b"), ("S", "a"), ("a", "K"), ("b", "K")],
    )
    assert g.topological_order() == ("S", "a", "b", "K")


def test_cycle_rejected():
    with pytest.raises(GraphValidationError, match="cycle"):
        DataflowGraph(
            {"A": op(source=True), "B": op(), "C": op(sink=True)},
            [("A", "B"), ("B", "B"), ("B", "C")],
        )
    with pytest.raises(GraphValidationError):
        DataflowGraph(
            {"A": op(source=True), "B": op(), "C": op(), "D": op(sink=True)},
            [("A", "B"), ("B", "C"), ("C", "B"), ("C", "D")],
        )


def test_unknown_edge_endpoint_rejected():
    with pytest.raises(GraphValidationError, match="unknown operator"):
        DataflowGraph({"A": op(source=True, sink=True)}, [("A", "Z")])


def test_duplicate_edge_rejected():
    with pytest.raises(GraphValidationError, match="duplicate"):
        DataflowGraph(
            {"A": op(source=True), "B": op(sink=True)},
            [("A", "B"), ("A", "B")],
        )


def test_flag_degree_consistency_enforced():
    with pytest.raises(GraphValidationError, match="not a source"):
        DataflowGraph({"A": op(), "B": op(sink=True)}, [("A", "B")])
    with pytest.raises(GraphValidationError, match="has input edges"):
        DataflowGraph(
            {"A": op(source=True), "B": op(source=True, sink=True)},
            [("A", "B")],
        )


def test_reachability():
    g = DataflowGraph(
        {
            "S": op(source=True),
            "A": op(),
            "B": op(),
            "C": op(),
            "K": op(sink=True),
        },
        [("S", "A"), ("S", "B"), ("A", "C"), ("B", "C"), ("C", "K")],
    )
    assert g.descendants("A") == {"C", "K"}
    assert g.ancestors("C") == {"S", "A", "B"}
    assert g.reaches("S", "K")
    assert not g.reaches("A", "B")


def test_worker_count_validation():
    with pytest.raises(GraphValidationError, match="worker_count"):
        DataflowGraph({"A": op(source=True, sink=True, workers=0)}, [])
