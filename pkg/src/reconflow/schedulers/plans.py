from __future__ import annotations

from typing import Mapping

from ..engine.functions import ResolvedUpdate
from ..engine.messages import EpochMarker
from ..engine.plan import ReconfigPlan
from ..graph.mcs import find_mcs
from ..graph.model import Arity, DataflowGraph, OperatorId
from ..graph.reconfig_set import extend_reconfig_set

Request = Mapping[OperatorId, ResolvedUpdate]


def _expand_request(graph: DataflowGraph,
                    request: Request) -> dict[OperatorId, ResolvedUpdate]:
    """Map a request on logical operators to per-worker updates.

    A key naming a logical operator targets all its workers; a key naming
    a single worker targets just that worker.
    """
    if not request:
        raise ValueError("empty reconfiguration request")
    by_logical: dict[OperatorId, list[OperatorId]] = {}
    for w in graph.operators:
        meta = graph.meta(w)
        if meta.synthetic_replicate:
            continue
        by_logical.setdefault(meta.logical(w), []).append(w)
    out: dict[OperatorId, ResolvedUpdate] = {}
    for op, update in request.items():
        workers = by_logical.get(op)
        if workers is None:
            if op in graph and not graph.meta(op).synthetic_replicate:
                workers = [op]
            else:
                raise ValueError(f"unknown operator in request: {op!r}")
        for w in workers:
            out[w] = update
    return out


def schedule_epoch(graph: DataflowGraph, request: Request) -> ReconfigPlan:
    updates = _expand_request(graph, request)
    sources = graph.sources()
    marker = EpochMarker(marker_id="ebr", updates=dict(updates))
    return ReconfigPlan(
        scheduler="epoch",
        updates=updates,
        fcm_targets=sources,
        markers={src: marker for src in sources},
        info={"targets": tuple(sorted(updates))},
    )


def schedule_naive_fcm(graph: DataflowGraph, request: Request) -> ReconfigPlan:
    updates = _expand_request(graph, request)
    return ReconfigPlan(
        scheduler="naive",
        updates=updates,
        fcm_targets=tuple(sorted(updates)),
        info={"targets": tuple(sorted(updates))},
    )


def schedule_multi_version(graph: DataflowGraph, request: Request) -> ReconfigPlan:
    updates = _expand_request(graph, request)
    return ReconfigPlan(
        scheduler="multiversion",
        updates=updates,
        fcm_targets=tuple(sorted(updates)),
        info={"targets": tuple(sorted(updates))},
    )


def schedule_fries(
    graph: DataflowGraph,
    request: Request,
    *,
    extended: bool = True,
    pruning: bool = True,
    allow_unsafe_basic: bool = False,
) -> ReconfigPlan:
    """Component-scoped marker plan.

    Basic mode (extended=False) is only sound when no one-to-many operator
    sits on a path into the targets; requesting it anyway raises unless
    ``allow_unsafe_basic`` is set (negative-control tests only).
    """
    requested = _expand_request(graph, request)
    targets = frozenset(requested)
    if extended:
        members = extend_reconfig_set(graph, targets, pruning=pruning)
    else:
        fanout = sorted(
            a for t in targets for a in graph.ancestors(t)
            if graph.meta(a).arity is Arity.ONE_TO_MANY
        )
        if fanout and not allow_unsafe_basic:
            raise ValueError(
                f"one-to-many operators {fanout} feed the targets; "
                f"basic mode is unsafe here, use extended=True"
            )
        members = targets
    updates: dict[OperatorId, ResolvedUpdate] = {
        w: requested.get(w, ResolvedUpdate()) for w in sorted(members)
    }
    mcs = find_mcs(graph, members)
    markers: dict[OperatorId, EpochMarker] = {}
    heads: list[OperatorId] = []
    comp_info = []
    for comp in mcs.components:
        comp_info.append({
            "vertices": comp.vertices,
            "heads": comp.heads,
            "longest_path": comp.longest_path_len,
        })
        heads.extend(comp.heads)
        if len(comp.vertices) == 1:
            continue
        member_updates = {
            w: updates[w] for w in comp.vertices
            if w in updates and w not in comp.heads
        }
        marker = EpochMarker(
            marker_id=f"fries-{min(comp.vertices)}",
            scope_vertices=frozenset(comp.vertices),
            scope_edges=frozenset(comp.edges),
            updates=member_updates,
        )
        for head in comp.heads:
            markers[head] = marker
    return ReconfigPlan(
        scheduler="fries",
        updates=updates,
        fcm_targets=tuple(sorted(heads)),
        markers=markers,
        info={
            "targets": tuple(sorted(targets)),
            "members": tuple(sorted(members)),
            "extended": extended,
            "pruning": pruning,
            "mcs_vertices": tuple(sorted(mcs.vertices)),
            "components": tuple(comp_info),
        },
    )
