"""Workflow catalog: the pipelines used by tests, experiments and the CLI.

Small fixed topologies (fig2 through fig12) exercise specific scheduler
behaviours; the w1..w5 families mirror the evaluation pipelines (fraud
detection chains, star-join unions, replicate/self-join shapes).  Builders
return logical graphs; callers expand them for multi-worker runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..engine.functions import OperatorFunction
from ..graph.model import Arity, DataflowGraph, OperatorId, OperatorMeta
from .registry import make_function


def _op(*, source=False, sink=False, one_to_many=False, per_edge=False,
        uniqueness=False, blocking=False, workers=1, cost_ms=1.0,
        partitioning="hash") -> OperatorMeta:
    from ..graph.model import Partitioning
    return OperatorMeta(
        arity=Arity.ONE_TO_MANY if one_to_many else Arity.ONE_TO_ONE,
        per_edge_one_to_one=per_edge,
        uniqueness=uniqueness,
        blocking=blocking,
        is_source=source,
        is_sink=sink,
        worker_count=workers,
        partitioning=Partitioning(partitioning),
        cost_ms=cost_ms,
    )


@dataclass
class Workflow:
    name: str
    graph: DataflowGraph
    functions: dict[OperatorId, OperatorFunction]
    default_targets: tuple[OperatorId, ...]
    description: str = ""
    params: Mapping[str, Any] = field(default_factory=dict)


def _fig2(**kw) -> Workflow:
    g = DataflowGraph(
        {"SRC": _op(source=True, cost_ms=0.5), "FC": _op(),
         "FM": _op(cost_ms=2.0), "MC": _op(sink=True)},
        [("SRC", "FC"), ("FC", "FM"), ("FM", "MC")],
    )
    fns = {"SRC": make_function("source_seq")}
    return Workflow("fig2", g, fns, ("FM", "MC"),
                    "three-stage chain; the naive-FCM hazard shape")


def _fig7(**kw) -> Workflow:
    g = DataflowGraph(
        {"SRC": _op(source=True, cost_ms=0.5), "X": _op(),
         "C": _op(), "D": _op(), "UN": _op(sink=True)},
        [("SRC", "X"), ("X", "C"), ("X", "D"), ("C", "UN"), ("D", "UN")],
    )
    fns = {
        "SRC": make_function("source_seq"),
        "X": make_function("route_round_robin", {"targets": ["C", "D"]}),
    }
    return Workflow("fig7", g, fns, ("C", "D"),
                    "router with two disjoint branches; naive-safe shape")


def _fig9(**kw) -> Workflow:
    g = DataflowGraph(
        {
            "A": _op(source=True, cost_ms=0.5),
            "B": _op(source=True, cost_ms=0.5),
            "C": _op(), "D": _op(), "E": _op(), "F": _op(), "G": _op(),
            "H": _op(sink=True),
        },
        [("A", "C"), ("B", "C"), ("B", "G"), ("C", "D"), ("C", "E"),
         ("D", "F"), ("E", "F"), ("F", "H"), ("G", "H")],
    )
    fns = {
        "A": make_function("source_seq"),
        "B": make_function("source_alternate", {"targets": ["C", "G"]}),
        "C": make_function("route_round_robin", {"targets": ["D", "E"]}),
    }
    return Workflow("fig9", g, fns, ("C", "F", "G"),
                    "two components: {C,D,E,F} with head C, and {G}")


def _fig10(**kw) -> Workflow:
    g = DataflowGraph(
        {
            "SRC": _op(source=True, cost_ms=0.5), "FC": _op(),
            "J": _op(one_to_many=True), "SP": _op(),
            "FMX": _op(), "FMY": _op(), "U1": _op(sink=True),
        },
        [("SRC", "FC"), ("FC", "J"), ("J", "SP"), ("SP", "FMX"),
         ("SP", "FMY"), ("FMX", "U1"), ("FMY", "U1")],
    )
    fns = {
        "SRC": make_function("source_seq"),
        "J": make_function("fanout", {"n": 3}),
        "SP": make_function("route_by_part",
                            {"targets": ["FMX", "FMX", "FMY"]}),
    }
    return Workflow("fig10", g, fns, ("FMX",),
                    "fan-out three, split two ways; one txn logs 11 events")


def _fig11(variant="a", **kw) -> Workflow:
    if variant in ("a", "b"):
        g = DataflowGraph(
            {
                "SRC": _op(source=True, cost_ms=0.5),
                "RE": _op(one_to_many=True, per_edge=True),
                "C": _op(), "D": _op(), "E": _op(), "F": _op(),
                "UN": _op(sink=True),
            },
            [("SRC", "RE"), ("RE", "C"), ("RE", "D"), ("C", "E"),
             ("D", "F"), ("E", "UN"), ("F", "UN")],
        )
        targets = ("E",) if variant == "a" else ("E", "F")
    else:
        g = DataflowGraph(
            {
                "SRC": _op(source=True, cost_ms=0.5),
                "RE": _op(one_to_many=True, per_edge=True),
                "C": _op(), "D": _op(), "X": _op(), "SNK": _op(sink=True),
            },
            [("SRC", "RE"), ("RE", "C"), ("RE", "D"), ("C", "X"),
             ("D", "X"), ("X", "SNK")],
        )
        targets = ("X",)
    fns = {
        "SRC": make_function("source_seq"),
        "RE": make_function("replicate_to", {"targets": ["C", "D"]}),
    }
    return Workflow(f"fig11{variant}", g, fns, targets,
                    "replicate branches; pruning-rule-1 shapes")


def _fig12(**kw) -> Workflow:
    g = DataflowGraph(
        {
            "SRC": _op(source=True, cost_ms=0.5),
            "RE": _op(one_to_many=True, per_edge=True),
            "C": _op(), "D": _op(),
            "SJ": _op(uniqueness=True), "E": _op(), "SNK": _op(sink=True),
        },
        [("SRC", "RE"), ("RE", "C"), ("RE", "D"), ("C", "SJ"),
         ("D", "SJ"), ("SJ", "E"), ("E", "SNK")],
    )
    fns = {
        "SRC": make_function("source_seq"),
        "RE": make_function("replicate_to", {"targets": ["C", "D"]}),
        "SJ": make_function("pair_join"),
    }
    return Workflow("fig12", g, fns, ("E",),
                    "replicate joined back by a uniqueness operator")


def _w1(fd_cost_ms=25.0, fd_workers=1, versioned=False, bump_every=1000,
        **kw) -> Workflow:
    g = DataflowGraph(
        {"SRC1": _op(source=True, cost_ms=0.0),
         "FD": _op(cost_ms=fd_cost_ms, workers=fd_workers),
         "K1": _op(sink=True, cost_ms=0.1)},
        [("SRC1", "FD"), ("FD", "K1")],
    )
    if versioned:
        fns = {
            "SRC1": make_function("source_versioned",
                                  {"bump_every": bump_every}),
            "FD": make_function("versioned_check"),
        }
    else:
        fns = {
            "SRC1": make_function("source_seq"),
            "FD": make_function("window_score", {"width": 10}),
        }
    return Workflow("w1", g, fns, ("FD",),
                    "single-inference chain; delay and invalid-count sweeps",
                    params={"versioned": versioned, "bump_every": bump_every})


def _w2(workers=1, cost_ms=2.0, **kw) -> Workflow:
    names = ["J1", "J2", "J3", "J4"]
    ops = {"SRC2": _op(source=True, cost_ms=0.2)}
    for n in names:
        ops[n] = _op(cost_ms=cost_ms, workers=workers)
    ops["K2"] = _op(sink=True, cost_ms=0.1, workers=workers)
    edges = [("SRC2", "J1"), ("J1", "J2"), ("J2", "J3"), ("J3", "J4"),
             ("J4", "K2")]
    fns = {"SRC2": make_function("source_seq")}
    for n in names:
        fns[n] = make_function("enrich", {"tag": n.lower()})
    return Workflow("w2", DataflowGraph(ops, edges), fns, ("J1", "J3"),
                    "four-join probe chain")


def _w3(j6_cost_ms=8.0, **kw) -> Workflow:
    g = DataflowGraph(
        {
            "SA": _op(source=True, cost_ms=0.5),
            "SB": _op(source=True, cost_ms=0.5),
            "SC": _op(source=True, cost_ms=0.5),
            "J5": _op(cost_ms=2.0), "J6": _op(cost_ms=j6_cost_ms),
            "J7": _op(cost_ms=2.0),
            "U1": _op(), "J8": _op(cost_ms=2.0), "J9": _op(cost_ms=2.0),
            "K3": _op(sink=True, cost_ms=0.1),
        },
        [("SA", "J5"), ("SB", "J6"), ("SC", "J7"), ("J5", "U1"),
         ("J6", "U1"), ("J7", "U1"), ("U1", "J8"), ("J8", "J9"),
         ("J9", "K3")],
    )
    fns = {s: make_function("source_seq") for s in ("SA", "SB", "SC")}
    return Workflow("w3", g, fns, ("J5", "J6"),
                    "three-branch union feeding a join tail")


def _w4(**kw) -> Workflow:
    g = DataflowGraph(
        {
            "SRC4": _op(source=True, cost_ms=0.5), "F1": _op(),
            "U2": _op(one_to_many=True), "FD1": _op(cost_ms=3.0),
            "FD2": _op(cost_ms=3.0), "F2": _op(),
            "K4": _op(sink=True, cost_ms=0.1),
        },
        [("SRC4", "F1"), ("F1", "U2"), ("U2", "FD1"), ("FD1", "FD2"),
         ("FD2", "F2"), ("F2", "K4")],
    )
    fns = {
        "SRC4": make_function("source_seq"),
        "U2": make_function("fanout", {"n": 2}),
        "FD1": make_function("window_score", {"width": 10}),
        "FD2": make_function("window_score", {"width": 50}),
    }
    return Workflow("w4", g, fns, ("FD1",),
                    "dual-inference chain behind a fan-out")


def _w5(**kw) -> Workflow:
    g = DataflowGraph(
        {
            "SRC5": _op(source=True, cost_ms=0.5),
            "RE": _op(one_to_many=True, per_edge=True),
            "FD3": _op(cost_ms=3.0), "S1": _op(), "F3": _op(),
            "F4": _op(), "FD4": _op(cost_ms=3.0),
            "SJ": _op(uniqueness=True), "E1": _op(),
            "K5": _op(sink=True, cost_ms=0.1),
        },
        [("SRC5", "RE"), ("RE", "FD3"), ("FD3", "S1"), ("S1", "F3"),
         ("F3", "SJ"), ("RE", "F4"), ("F4", "FD4"), ("FD4", "SJ"),
         ("SJ", "E1"), ("E1", "K5")],
    )
    fns = {
        "SRC5": make_function("source_seq"),
        "RE": make_function("replicate_to", {"targets": ["FD3", "F4"]}),
        "FD3": make_function("window_score", {"width": 10}),
        "FD4": make_function("window_score", {"width": 50}),
        "SJ": make_function("pair_join"),
    }
    return Workflow("w5", g, fns, ("E1",),
                    "replicated branches re-joined by a self-join")


_CATALOG: dict[str, Callable[..., Workflow]] = {
    "fig2": _fig2,
    "fig7": _fig7,
    "fig9": _fig9,
    "fig10": _fig10,
    "fig11a": lambda **kw: _fig11("a", **kw),
    "fig11b": lambda **kw: _fig11("b", **kw),
    "fig11c": lambda **kw: _fig11("c", **kw),
    "fig12": _fig12,
    "w1": _w1,
    "w2": _w2,
    "w3": _w3,
    "w4": _w4,
    "w5": _w5,
}


def workflow_names() -> tuple[str, ...]:
    return tuple(sorted(_CATALOG))


def build_workflow(name: str, **params: Any) -> Workflow:
    try:
        builder = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown workflow {name!r}; known: {workflow_names()}")
    return builder(**params)
