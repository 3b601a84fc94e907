from __future__ import annotations

import random

from reconflow.graph import (
    DataflowGraph,
    extend_reconfig_set,
    find_mcs,
    prune_ancestors,
)

from conftest import op
from graphgen import random_dag_mixed


def fanout_pipeline() -> DataflowGraph:
    """Source -> FC -> J (fan-out) -> SP -> {FMX, FMY} -> union sink."""
    return DataflowGraph(
        {
            "SRC": op(source=True),
            "FC": op(),
            "J": op(one_to_many=True),
            "SP": op(),
            "FMX": op(),
            "FMY": op(),
            "U1": op(sink=True),
        },
        [
            ("SRC", "FC"),
            ("FC", "J"),
            ("J", "SP"),
            ("SP", "FMX"),
            ("SP", "FMY"),
            ("FMX", "U1"),
            ("FMY", "U1"),
        ],
    )


def replicate_split() -> DataflowGraph:
    """RE copies each tuple to both branches; branches stay separate."""
    return DataflowGraph(
        {
            "SRC": op(source=True),
            "RE": op(one_to_many=True, per_edge_one_to_one=True),
            "C": op(),
            "D": op(),
            "E": op(),
            "F": op(),
            "UN": op(sink=True),
        },
        [
            ("SRC", "RE"),
            ("RE", "C"),
            ("RE", "D"),
            ("C", "E"),
            ("D", "F"),
            ("E", "UN"),
            ("F", "UN"),
        ],
    )


def replicate_rejoin() -> DataflowGraph:
    """RE copies to both branches, a keyed self-join collapses them."""
    return DataflowGraph(
        {
            "SRC": op(source=True),
            "RE": op(one_to_many=True, per_edge_one_to_one=True),
            "C": op(),
            "D": op(),
            "SJ": op(uniqueness=True),
            "E": op(sink=True),
        },
        [
            ("SRC", "RE"),
            ("RE", "C"),
            ("RE", "D"),
            ("C", "SJ"),
            ("D", "SJ"),
            ("SJ", "E"),
        ],
    )


def test_extension_pulls_in_fanout_ancestor():
    g = fanout_pipeline()
    assert extend_reconfig_set(g, {"FMX"}) == {"FMX", "J"}
    # MCS of the extended set covers the splitter in between
    mcs = find_mcs(g, extend_reconfig_set(g, {"FMX"}))
    assert mcs.vertices == {"J", "SP", "FMX"}
    comp = mcs.components[0]
    assert comp.heads == ("J",)


def test_extension_without_fanout_is_identity():
    g = fanout_pipeline()
    assert extend_reconfig_set(g, {"FC"}) == {"FC"}


def test_earliest_ancestor_only():
    # two fan-out operators in a chain: only the earliest joins the set
    g = DataflowGraph(
        {
            "SRC": op(source=True),
            "J1": op(one_to_many=True),
            "J2": op(one_to_many=True),
            "T": op(),
            "K": op(sink=True),
        },
        [("SRC", "J1"), ("J1", "J2"), ("J2", "T"), ("T", "K")],
    )
    assert extend_reconfig_set(g, {"T"}, pruning=False) == {"T", "J1"}


def test_incomparable_minimal_ancestors_all_kept():
    g = DataflowGraph(
        {
            "S1": op(source=True),
            "S2": op(source=True),
            "JA": op(one_to_many=True),
            "JB": op(one_to_many=True),
            "M": op(),
            "T": op(),
            "K": op(sink=True),
        },
        [("S1", "JA"), ("S2", "JB"), ("JA", "M"), ("JB", "M"), ("M", "T"), ("T", "K")],
    )
    assert extend_reconfig_set(g, {"T"}, pruning=False) == {"T", "JA", "JB"}


def test_prune_single_branch_replicate():
    g = replicate_split()
    # only the C branch reaches E, so RE cannot split a transaction there
    assert extend_reconfig_set(g, {"E"}) == {"E"}
    assert extend_reconfig_set(g, {"E"}, pruning=False) == {"E", "RE"}


def test_no_prune_when_both_branches_reach_targets():
    g = replicate_split()
    assert extend_reconfig_set(g, {"E", "F"}) == {"E", "F", "RE"}


def test_no_prune_when_branches_reconverge_on_target():
    g = DataflowGraph(
        {
            "SRC": op(source=True),
            "RE": op(one_to_many=True, per_edge_one_to_one=True),
            "C": op(),
            "D": op(),
            "X": op(),
            "K": op(sink=True),
        },
        [("SRC", "RE"), ("RE", "C"), ("RE", "D"), ("C", "X"), ("D", "X"), ("X", "K")],
    )
    assert extend_reconfig_set(g, {"X"}) == {"X", "RE"}


def test_prune_requires_per_edge_one_to_one():
    # same shape as the prunable case, but the fan-out may emit several
    # tuples down one edge, so it stays
    g = DataflowGraph(
        {
            "SRC": op(source=True),
            "J": op(one_to_many=True),
            "C": op(),
            "D": op(),
            "E": op(),
            "UN": op(sink=True),
        },
        [("SRC", "J"), ("J", "C"), ("J", "D"), ("C", "E"), ("E", "UN"), ("D", "UN")],
    )
    assert extend_reconfig_set(g, {"E"}) == {"E", "J"}


def test_prune_behind_uniqueness_operator():
    g = replicate_rejoin()
    assert extend_reconfig_set(g, {"E"}) == {"E"}
    assert extend_reconfig_set(g, {"E"}, pruning=False) == {"E", "RE"}


def test_uniqueness_on_some_paths_only_does_not_prune():
    g = DataflowGraph(
        {
            "SRC": op(source=True),
            "RE": op(one_to_many=True),
            "C": op(),
            "SJ": op(uniqueness=True),
            "D": op(),
            "E": op(sink=True),
        },
        [("SRC", "RE"), ("RE", "C"), ("C", "SJ"), ("SJ", "E"), ("RE", "D"), ("D", "E")],
    )
    # the RE -> D -> E path bypasses the deduplicating operator
    assert extend_reconfig_set(g, {"E"}) == {"E", "RE"}


def test_target_uniqueness_does_not_guard_itself():
    g = DataflowGraph(
        {
            "SRC": op(source=True),
            "RE": op(one_to_many=True),
            "C": op(),
            "D": op(),
            "SJ": op(uniqueness=True),
            "K": op(sink=True),
        },
        [("SRC", "RE"), ("RE", "C"), ("RE", "D"), ("C", "SJ"), ("D", "SJ"), ("SJ", "K")],
    )
    # replicas still arrive at SJ itself, so reconfiguring SJ needs RE
    assert extend_reconfig_set(g, {"SJ"}) == {"SJ", "RE"}


def test_prune_ancestors_direct():
    g = replicate_rejoin()
    assert prune_ancestors(g, {"E"}, {"RE"}) == frozenset()
    assert prune_ancestors(g, {"SJ"}, {"RE"}) == {"RE"}
    assert prune_ancestors(g, {"E"}, ()) == frozenset()


def test_extension_idempotent_on_random_graphs():
    rng = random.Random(41)
    for _ in range(200):
        g = random_dag_mixed(rng, max_n=9)
        names = list(g.operators)
        m = frozenset(rng.sample(names, rng.randint(1, min(3, len(names)))))
        for pruning in (False, True):
            once = extend_reconfig_set(g, m, pruning=pruning)
            twice = extend_reconfig_set(g, once, pruning=pruning)
            assert m <= once
            assert once == twice


def test_added_ancestors_have_no_fanout_above_them():
    rng = random.Random(42)
    for _ in range(200):
        g = random_dag_mixed(rng, max_n=9)
        names = list(g.operators)
        m = frozenset(rng.sample(names, rng.randint(1, min(3, len(names)))))
        extended = extend_reconfig_set(g, m, pruning=False)
        from reconflow.graph import Arity

        for added in extended - m:
            above = {
                a
                for a in g.ancestors(added)
                if g.meta(a).arity is Arity.ONE_TO_MANY
            }
            assert not above
