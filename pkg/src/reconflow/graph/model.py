"""Dataflow graph model.

A dataflow is a DAG of operators.  Vertices carry :class:`OperatorMeta`
describing how the operator behaves at runtime (fan-out class, worker count,
partitioning of its output edges, per-tuple cost).  Edges are directed data
channels at the operator level; worker-level channels are derived by
:func:`reconflow.graph.parallel.expand_parallel`.

Graphs are immutable after construction: validation happens in ``__init__``
and derived structures (adjacency, topological order, reachability) are
cached on first use.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping

OperatorId = str
Edge = tuple[OperatorId, OperatorId]


class GraphValidationError(ValueError):
    """Raised when a dataflow graph violates a structural invariant."""


class Arity(str, Enum):
    """How many output tuples an operator may emit per input tuple."""

    ONE_TO_ONE = "one_to_one"      # at most one output per input
    ONE_TO_MANY = "one_to_many"    # possibly several outputs per input


class Partitioning(str, Enum):
    """How an operator's output edges distribute tuples across workers."""

    HASH = "hash"
    RANGE = "range"
    BROADCAST = "broadcast"


@dataclass(frozen=True)
class OperatorMeta:
    """Static description of one operator.

    Attributes:
        arity: fan-out class per input tuple.
        per_edge_one_to_one: the operator emits at most one tuple on each
            of its output edges per input tuple (replicate-style fan-out).
        uniqueness: the operator emits at most one tuple per data
            transaction (e.g. a keyed self-join collapsing replicas).
        blocking: the operator materializes its full input before emitting
            (segment boundary; see ``segment_by_blocking``).
        is_source: ingests external tuples; must have no input edges.
        is_sink: terminal consumer; must have no output edges.
        worker_count: parallel worker instances of this operator.
        partitioning: distribution of this operator's output edges.
        cost_ms: virtual per-tuple processing cost in milliseconds.
        logical_id: for worker vertices produced by parallel expansion,
            the id of the operator they instantiate.  ``None`` means the
            vertex is itself the logical operator.
        worker_index: index of this worker vertex within its operator.
        synthetic_replicate: vertex inserted by parallel expansion to model
            a broadcast edge; copies each input tuple to every output edge.
    """

    arity: Arity = Arity.ONE_TO_ONE
    per_edge_one_to_one: bool = False
    uniqueness: bool = False
    blocking: bool = False
    is_source: bool = False
    is_sink: bool = False
    worker_count: int = 1
    partitioning: Partitioning = Partitioning.HASH
    cost_ms: float = 1.0
    logical_id: OperatorId | None = None
    worker_index: int = 0
    synthetic_replicate: bool = False

    def logical(self, own_id: OperatorId) -> OperatorId:
        return self.logical_id if self.logical_id is not None else own_id


class DataflowGraph:
    """Immutable DAG of operators with cached derived structure."""

    def __init__(
        self,
        operators: Mapping[OperatorId, OperatorMeta],
        edges: Iterable[Edge],
    ) -> None:
        self._meta: dict[OperatorId, OperatorMeta] = dict(operators)
        self._edges: tuple[Edge, ...] = tuple((str(a), str(b)) for a, b in edges)
        self._children: dict[OperatorId, tuple[OperatorId, ...]] = {}
        self._parents: dict[OperatorId, tuple[OperatorId, ...]] = {}
        self._order: tuple[OperatorId, ...] | None = None
        self._desc_cache: dict[OperatorId, frozenset[OperatorId]] = {}
        self._anc_cache: dict[OperatorId, frozenset[OperatorId]] = {}
        self._build_adjacency()
        self._validate()

    # -- construction ------------------------------------------------------

    def _build_adjacency(self) -> None:
        children: dict[OperatorId, list[OperatorId]] = {v: [] for v in self._meta}
        parents: dict[OperatorId, list[OperatorId]] = {v: [] for v in self._meta}
        seen: set[Edge] = set()
        for a, b in self._edges:
            if a not in self._meta or b not in self._meta:
                raise GraphValidationError(f"edge ({a}, {b}) references unknown operator")
            if (a, b) in seen:
                raise GraphValidationError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            children[a].append(b)
            parents[b].append(a)
        self._children = {v: tuple(sorted(c)) for v, c in children.items()}
        self._parents = {v: tuple(sorted(p)) for v, p in parents.items()}

    def _validate(self) -> None:
        if not self._meta:
            raise GraphValidationError("graph has no operators")
        for v, meta in self._meta.items():
            if meta.worker_count < 1:
                raise GraphValidationError(f"{v}: worker_count must be >= 1")
            indeg, outdeg = len(self._parents[v]), len(self._children[v])
            if meta.is_source and indeg:
                raise GraphValidationError(f"source {v} has input edges")
            if meta.is_sink and outdeg:
                raise GraphValidationError(f"sink {v} has output edges")
            if indeg == 0 and not meta.is_source:
                raise GraphValidationError(f"{v} has no input edges but is not a source")
            if outdeg == 0 and not meta.is_sink:
                raise GraphValidationError(f"{v} has no output edges but is not a sink")
        self._order = self._topological_sort()  # raises on cycles

    def _topological_sort(self) -> tuple[OperatorId, ...]:
        # Kahn's algorithm; ties resolved by ascending operator id so that
        # every derived structure is deterministic.
        import heapq

        indeg = {v: len(self._parents[v]) for v in self._meta}
        ready = [v for v, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order: list[OperatorId] = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self._meta):
            rest = sorted(v for v, d in indeg.items() if d > 0)
            raise GraphValidationError(f"graph contains a cycle through {rest}")
        return tuple(order)

    # -- accessors ---------------------------------------------------------

    @property
    def operators(self) -> Mapping[OperatorId, OperatorMeta]:
        return self._meta

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def meta(self, v: OperatorId) -> OperatorMeta:
        return self._meta[v]

    def __contains__(self, v: object) -> bool:
        return v in self._meta

    def __len__(self) -> int:
        return len(self._meta)

    def children(self, v: OperatorId) -> tuple[OperatorId, ...]:
        return self._children[v]

    def parents(self, v: OperatorId) -> tuple[OperatorId, ...]:
        return self._parents[v]

    @property
    def child_map(self) -> Mapping[OperatorId, tuple[OperatorId, ...]]:
        """Read-only adjacency, useful for tight sweeps over the graph."""
        return self._children

    @property
    def parent_map(self) -> Mapping[OperatorId, tuple[OperatorId, ...]]:
        return self._parents

    def topological_order(self) -> tuple[OperatorId, ...]:
        assert self._order is not None
        return self._order

    def sources(self) -> tuple[OperatorId, ...]:
        return tuple(v for v in self.topological_order() if self._meta[v].is_source)

    def sinks(self) -> tuple[OperatorId, ...]:
        return tuple(v for v in self.topological_order() if self._meta[v].is_sink)

    # -- reachability ------------------------------------------------------

    def descendants(self, v: OperatorId) -> frozenset[OperatorId]:
        """All operators strictly downstream of ``v``."""
        cached = self._desc_cache.get(v)
        if cached is None:
            cached = frozenset(self._reach(v, self._children))
            self._desc_cache[v] = cached
        return cached

    def ancestors(self, v: OperatorId) -> frozenset[OperatorId]:
        """All operators strictly upstream of ``v``."""
        cached = self._anc_cache.get(v)
        if cached is None:
            cached = frozenset(self._reach(v, self._parents))
            self._anc_cache[v] = cached
        return cached

    def _reach(
        self, start: OperatorId, adj: Mapping[OperatorId, tuple[OperatorId, ...]]
    ) -> set[OperatorId]:
        if start not in self._meta:
            raise KeyError(start)
        out: set[OperatorId] = set()
        frontier = deque(adj[start])
        while frontier:
            v = frontier.popleft()
            if v in out:
                continue
            out.add(v)
            frontier.extend(adj[v])
        return out

    def reaches(self, a: OperatorId, b: OperatorId) -> bool:
        """True when there is a directed path from ``a`` to ``b``."""
        return b in self.descendants(a)

    # -- derivation --------------------------------------------------------

    def with_meta(self, updates: Mapping[OperatorId, OperatorMeta]) -> "DataflowGraph":
        merged = dict(self._meta)
        merged.update(updates)
        return DataflowGraph(merged, self._edges)

    def with_worker_counts(self, counts: Mapping[OperatorId, int]) -> "DataflowGraph":
        updates = {
            v: replace(self._meta[v], worker_count=k) for v, k in counts.items()
        }
        return self.with_meta(updates)

    def __repr__(self) -> str:
        return f"DataflowGraph({len(self._meta)} operators, {len(self._edges)} edges)"
