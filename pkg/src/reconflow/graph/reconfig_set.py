"""Extension and pruning of reconfiguration sets.

When a reconfiguration target sits below a fan-out operator, a single data
transaction can reach it as several tuples.  To keep the switch atomic per
transaction, marker propagation has to start no later than the earliest
fan-out point, so those ancestors are pulled into the reconfiguration set.
Two pruning rules drop ancestors whose fan-out provably cannot deliver more
than one tuple of a transaction to any reconfiguration target.
"""

from __future__ import annotations

from typing import Iterable

from .model import Arity, DataflowGraph, OperatorId


def extend_reconfig_set(
    graph: DataflowGraph,
    reconfig_ops: Iterable[OperatorId],
    *,
    pruning: bool = True,
) -> frozenset[OperatorId]:
    """Adds the earliest unpruned fan-out ancestors of every target.

    For each target, its one-to-many ancestors are collected, optionally
    pruned, and the minimal survivors under the ancestor order (all of
    them, when incomparable) join the returned set.
    """
    targets = frozenset(reconfig_ops)
    for v in targets:
        if v not in graph:
            raise KeyError(f"unknown operator in reconfiguration set: {v}")
    extended = set(targets)
    for op in sorted(targets):
        anc = frozenset(
            a for a in graph.ancestors(op)
            if graph.meta(a).arity is Arity.ONE_TO_MANY
        )
        if pruning:
            anc = prune_ancestors(graph, targets, anc)
        # earliest: no surviving fan-out ancestor further upstream
        extended.update(a for a in anc if not (graph.ancestors(a) & anc))
    return frozenset(extended)


def prune_ancestors(
    graph: DataflowGraph,
    reconfig_ops: Iterable[OperatorId],
    ancestors: Iterable[OperatorId],
) -> frozenset[OperatorId]:
    """Filters fan-out ancestors that cannot split a transaction.

    An ancestor ``a`` is pruned when either

    * ``a`` emits at most one tuple per output edge and exactly one of its
      output edges reaches any reconfiguration target (so at most one tuple
      of each transaction travels toward the targets), or
    * every path from ``a`` to every reachable target passes through an
      operator with ``uniqueness`` set, which collapses the fan-out back to
      at most one tuple per transaction before it arrives.

    Both readings are conservative: an ancestor is only dropped when the
    guarantee holds for all targets it can reach.
    """
    targets = frozenset(reconfig_ops)
    survivors = set()
    for a in ancestors:
        if _single_edge_toward_targets(graph, a, targets):
            continue
        if _all_paths_deduplicated(graph, a, targets):
            continue
        survivors.add(a)
    return frozenset(survivors)


def _single_edge_toward_targets(
    graph: DataflowGraph, a: OperatorId, targets: frozenset[OperatorId]
) -> bool:
    if not graph.meta(a).per_edge_one_to_one:
        return False
    touching = 0
    for child in graph.children(a):
        if child in targets or (graph.descendants(child) & targets):
            touching += 1
            if touching > 1:
                return False
    return touching == 1


def _all_paths_deduplicated(
    graph: DataflowGraph, a: OperatorId, targets: frozenset[OperatorId]
) -> bool:
    # A target is "guarded" when no path from `a` reaches it while avoiding
    # uniqueness operators strictly between the two.  Walk downstream from
    # `a`, refusing to pass through uniqueness vertices; any target touched
    # by this walk has an unguarded path.
    if not (graph.descendants(a) & targets):
        return False
    stack = [a]
    seen: set[OperatorId] = set()
    while stack:
        v = stack.pop()
        for child in graph.children(v):
            if child in seen:
                continue
            seen.add(child)
            if child in targets:
                return False
            if not graph.meta(child).uniqueness:
                stack.append(child)
    return True
