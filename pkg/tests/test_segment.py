from __future__ import annotations

import random

import pytest

from reconflow.graph import DataflowGraph, segment_by_blocking, segment_for_operators

from conftest import op
from graphgen import random_dag


def test_single_blocking_operator_splits_in_two():
    g = DataflowGraph(
        {"A": op(source=True), "B": op(blocking=True), "C": op(sink=True)},
        [("A", "B"), ("B", "C")],
    )
    segs = segment_by_blocking(g)
    assert len(segs) == 2
    assert segs[0].vertices == {"A", "B"}
    assert segs[0].edges == (("A", "B"),)
    assert segs[1].vertices == {"B", "C"}
    assert segs[1].edges == (("B", "C"),)


def test_two_blocking_operators_give_three_segments():
    g = DataflowGraph(
        {
            "A": op(source=True),
            "B1": op(blocking=True),
            "C": op(),
            "B2": op(blocking=True),
            "D": op(sink=True),
        },
        [("A", "B1"), ("B1", "C"), ("C", "B2"), ("B2", "D")],
    )
    segs = segment_by_blocking(g)
    assert [s.vertices for s in segs] == [
        {"A", "B1"},
        {"B1", "C", "B2"},
        {"B2", "D"},
    ]


def test_no_blocking_gives_one_segment():
    g = DataflowGraph(
        {"A": op(source=True), "B": op(), "C": op(), "K": op(sink=True)},
        [("A", "B"), ("A", "C"), ("B", "K"), ("C", "K")],
    )
    segs = segment_by_blocking(g)
    assert len(segs) == 1
    assert segs[0].vertices == set(g.operators)


def test_no_segment_straddles_a_blocking_operator():
    rng = random.Random(17)
    for _ in range(100):
        g = random_dag(rng, max_n=9, p=0.4)
        blocking = {
            v
            for v in g.operators
            if rng.random() < 0.3
            and not g.meta(v).is_source
            and not g.meta(v).is_sink
        }
        from dataclasses import replace

        g = g.with_meta(
            {v: replace(g.meta(v), blocking=True) for v in blocking}
        )
        for seg in segment_by_blocking(g):
            for v in seg.vertices:
                if g.meta(v).blocking:
                    has_in = any(b == v for _, b in seg.edges)
                    has_out = any(a == v for a, _ in seg.edges)
                    assert not (has_in and has_out)
        # every edge lands in exactly one segment
        counted = [e for seg in segment_by_blocking(g) for e in seg.edges]
        assert sorted(counted) == sorted(g.edges)


def test_request_routing():
    g = DataflowGraph(
        {"A": op(source=True), "B": op(blocking=True), "C": op(sink=True)},
        [("A", "B"), ("B", "C")],
    )
    segs = segment_by_blocking(g)
    assert segment_for_operators(segs, ["A"]) == 0
    assert segment_for_operators(segs, ["C"]) == 1
    with pytest.raises(ValueError):
        segment_for_operators(segs, ["A", "C"])
    with pytest.raises(ValueError):
        segment_for_operators(segs, [])
