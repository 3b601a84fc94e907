"""Splitting a dataflow at blocking operators.

A blocking operator consumes its entire input before emitting anything, so
data crosses it in a later execution phase.  Every edge is assigned the
phase in which it transmits (the largest number of blocking operators on
any path from a source up to and including the edge's tail), and a segment
is one weakly connected group of same-phase edges.  A blocking operator
therefore shows up twice: its input edges end the segment of one phase and
its output edges start a segment of the next.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import DataflowGraph, Edge, OperatorId


@dataclass(frozen=True)
class Segment:
    phase: int
    vertices: frozenset[OperatorId]
    edges: tuple[Edge, ...]


def segment_by_blocking(graph: DataflowGraph) -> tuple[Segment, ...]:
    """Partitions the edge set into pipelined sub-dataflows.

    Segments are ordered by phase, then by the earliest topological
    position of their vertices.  No segment contains both an input edge
    and an output edge of the same blocking operator.
    """
    meta = graph.operators
    # blocking operators strictly upstream of each vertex, max over paths
    upstream_blocks: dict[OperatorId, int] = {}
    for v in graph.topological_order():
        upstream_blocks[v] = max(
            (
                upstream_blocks[p] + (1 if meta[p].blocking else 0)
                for p in graph.parents(v)
            ),
            default=0,
        )

    def edge_phase(e: Edge) -> int:
        tail = e[0]
        return upstream_blocks[tail] + (1 if meta[tail].blocking else 0)

    by_phase: dict[int, list[Edge]] = {}
    for e in graph.edges:
        by_phase.setdefault(edge_phase(e), []).append(e)

    pos = {v: i for i, v in enumerate(graph.topological_order())}
    segments: list[Segment] = []
    for phase in sorted(by_phase):
        segments.extend(
            Segment(phase, frozenset(members), tuple(sorted(edges)))
            for members, edges in _weak_components(by_phase[phase])
        )
    for v in meta:
        if not graph.parents(v) and not graph.children(v):
            segments.append(Segment(upstream_blocks[v], frozenset({v}), ()))
    segments.sort(key=lambda s: (s.phase, min(pos[v] for v in s.vertices)))
    return tuple(segments)


def _weak_components(
    edges: list[Edge],
) -> list[tuple[set[OperatorId], list[Edge]]]:
    index: dict[OperatorId, int] = {}
    dsu: list[int] = []

    def find(i: int) -> int:
        while dsu[i] != i:
            dsu[i] = dsu[dsu[i]]
            i = dsu[i]
        return i

    for a, b in edges:
        for v in (a, b):
            if v not in index:
                index[v] = len(dsu)
                dsu.append(len(dsu))
        dsu[find(index[a])] = find(index[b])

    grouped: dict[int, tuple[set[OperatorId], list[Edge]]] = {}
    for e in edges:
        root = find(index[e[0]])
        members, group_edges = grouped.setdefault(root, (set(), []))
        members.update(e)
        group_edges.append(e)
    return list(grouped.values())


def segment_for_operators(
    segments: Iterable[Segment], ops: Iterable[OperatorId]
) -> int:
    """Index of the first segment containing all given operators.

    A reconfiguration request is routed to the segment that executes the
    named operators; a request spanning segments is rejected.
    """
    ops = frozenset(ops)
    if not ops:
        raise ValueError("no operators given")
    hits = [i for i, s in enumerate(segments) if ops <= s.vertices]
    if not hits:
        raise ValueError(f"operators {sorted(ops)} span multiple segments or are unknown")
    return hits[0]
