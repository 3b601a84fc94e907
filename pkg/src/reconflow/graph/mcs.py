"""Minimal covering sub-DAG (MCS) and its connected components.

Given a set ``m`` of operators selected for reconfiguration, the MCS is the
smallest sub-DAG that contains ``m`` and, for every ordered pair ``a, b`` in
``m``, every directed path from ``a`` to ``b`` (all path vertices and path
edges).  It is unique: it consists of ``m`` plus every vertex that is both a
descendant of some member and an ancestor of some member, together with all
original edges between the selected vertices.

Both operations here run in O(V + E): one forward and one backward sweep over
a cached topological order, plus one scan over the edge list.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .model import DataflowGraph, Edge, OperatorId


@dataclass
class VisitCounter:
    """Counts vertex and edge touches for complexity assertions."""

    vertex_visits: int = 0
    edge_visits: int = 0

    @property
    def total(self) -> int:
        return self.vertex_visits + self.edge_visits


@dataclass(frozen=True)
class Component:
    """One weakly connected component of an MCS.

    ``heads`` are the component members with no incoming edge from inside
    the component; they are the entry points through which every other
    member is reached.  ``longest_path_len`` counts edges on the longest
    directed path within the component (0 for a singleton).
    """

    vertices: frozenset[OperatorId]
    edges: tuple[Edge, ...]
    heads: tuple[OperatorId, ...]
    longest_path_len: int


@dataclass(eq=False)
class Mcs:
    """Minimal covering sub-DAG for a reconfiguration set."""

    vertices: frozenset[OperatorId]
    edges: tuple[Edge, ...]
    reconfig_ops: frozenset[OperatorId]

    @cached_property
    def components(self) -> tuple[Component, ...]:
        return find_components(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mcs):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and set(self.edges) == set(other.edges)
            and self.reconfig_ops == other.reconfig_ops
        )


def find_mcs(
    graph: DataflowGraph,
    reconfig_ops: Iterable[OperatorId],
    *,
    stats: VisitCounter | None = None,
) -> Mcs:
    """Computes the minimal covering sub-DAG of ``reconfig_ops``.

    An empty reconfiguration set yields an empty MCS.  Unknown operator ids
    raise ``KeyError``.
    """
    m = frozenset(reconfig_ops)
    for v in m:
        if v not in graph:
            raise KeyError(f"unknown operator in reconfiguration set: {v}")
    if not m:
        return Mcs(frozenset(), (), m)
    if stats is not None:
        return _find_mcs_counted(graph, m, stats)

    order = graph.topological_order()
    parent_map = graph.parent_map
    child_map = graph.child_map

    # Forward sweep: everything at or below a member of m.
    below: set[OperatorId] = set(m)
    for v in order:
        if v not in below:
            for p in parent_map[v]:
                if p in below:
                    below.add(v)
                    break
    # Backward sweep: everything at or above a member of m.
    above: set[OperatorId] = set(m)
    for v in reversed(order):
        if v not in above:
            for c in child_map[v]:
                if c in above:
                    above.add(v)
                    break

    vertices = frozenset(below & above)
    edges = tuple(e for e in graph.edges if e[0] in vertices and e[1] in vertices)
    return Mcs(vertices, edges, m)


def _find_mcs_counted(
    graph: DataflowGraph, m: frozenset[OperatorId], stats: VisitCounter
) -> Mcs:
    # Same sweeps as the fast path, tallying every vertex and edge touch.
    order = graph.topological_order()
    parent_map = graph.parent_map
    child_map = graph.child_map

    below: set[OperatorId] = set(m)
    for v in order:
        stats.vertex_visits += 1
        if v not in below:
            for p in parent_map[v]:
                stats.edge_visits += 1
                if p in below:
                    below.add(v)
                    break
    above: set[OperatorId] = set(m)
    for v in reversed(order):
        stats.vertex_visits += 1
        if v not in above:
            for c in child_map[v]:
                stats.edge_visits += 1
                if c in above:
                    above.add(v)
                    break

    vertices = frozenset(below & above)
    edges = []
    for e in graph.edges:
        stats.edge_visits += 1
        if e[0] in vertices and e[1] in vertices:
            edges.append(e)
    return Mcs(vertices, tuple(edges), m)


def find_components(
    mcs: Mcs, *, stats: VisitCounter | None = None
) -> tuple[Component, ...]:
    """Splits an MCS into weakly connected components.

    Components are returned sorted by their smallest vertex id; vertices,
    edges and heads within a component are sorted as well, so the result is
    deterministic for a given MCS.
    """
    neighbors: dict[OperatorId, list[OperatorId]] = {v: [] for v in mcs.vertices}
    for a, b in mcs.edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
        if stats is not None:
            stats.edge_visits += 1

    assigned: dict[OperatorId, int] = {}
    groups: list[list[OperatorId]] = []
    for start in sorted(mcs.vertices):
        if start in assigned:
            continue
        idx = len(groups)
        stack = [start]
        members: list[OperatorId] = []
        assigned[start] = idx
        while stack:
            v = stack.pop()
            members.append(v)
            if stats is not None:
                stats.vertex_visits += 1
            for n in neighbors[v]:
                if n not in assigned:
                    assigned[n] = idx
                    stack.append(n)
        groups.append(sorted(members))

    comp_edges: list[list[Edge]] = [[] for _ in groups]
    for e in sorted(mcs.edges):
        comp_edges[assigned[e[0]]].append(e)

    out = []
    for members, edges in zip(groups, comp_edges):
        heads = _heads(members, edges)
        out.append(
            Component(
                vertices=frozenset(members),
                edges=tuple(edges),
                heads=heads,
                longest_path_len=_longest_path(members, edges),
            )
        )
    out.sort(key=lambda c: min(c.vertices))
    return tuple(out)


def _heads(members: Sequence[OperatorId], edges: Sequence[Edge]) -> tuple[OperatorId, ...]:
    with_input = {b for _, b in edges}
    return tuple(v for v in members if v not in with_input)


def _longest_path(members: Sequence[OperatorId], edges: Sequence[Edge]) -> int:
    # Longest directed path by edge count, via relaxation in topological
    # order local to the component.
    children: dict[OperatorId, list[OperatorId]] = {v: [] for v in members}
    indeg = {v: 0 for v in members}
    for a, b in edges:
        children[a].append(b)
        indeg[b] += 1
    ready = [v for v in members if indeg[v] == 0]
    dist = {v: 0 for v in members}
    best = 0
    while ready:
        v = ready.pop()
        for c in children[v]:
            if dist[v] + 1 > dist[c]:
                dist[c] = dist[v] + 1
                if dist[c] > best:
                    best = dist[c]
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return best
