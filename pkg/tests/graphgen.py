"""Test-side graph builders and independent oracles.

The oracles here deliberately avoid the library's sweep-based algorithms:
the covering sub-DAG oracle enumerates directed paths pair by pair, the
component oracle uses union-find, and the literal oracle enumerates every
candidate sub-DAG and picks the minimal one.  They exist so the production
code and the tests cannot share a bug.
"""

from __future__ import annotations

import itertools
import random
from typing import Iterable, Sequence

from reconflow.graph import DataflowGraph, OperatorMeta


def graph_from_edges(n: int, edges: Iterable[tuple[int, int]]) -> DataflowGraph:
    """Builds a graph over vertices ``v0 .. v{n-1}`` with derived flags."""
    names = [f"v{i}" for i in range(n)]
    named = [(names[a], names[b]) for a, b in edges]
    with_in = {b for _, b in named}
    with_out = {a for a, _ in named}
    operators = {
        name: OperatorMeta(is_source=name not in with_in, is_sink=name not in with_out)
        for name in names
    }
    return DataflowGraph(operators, named)


def random_dag(rng: random.Random, max_n: int = 10, p: float = 0.35) -> DataflowGraph:
    n = rng.randint(2, max_n)
    edges = [
        (a, b)
        for a in range(n)
        for b in range(a + 1, n)
        if rng.random() < p
    ]
    return graph_from_edges(n, edges)


def random_dag_mixed(
    rng: random.Random, max_n: int = 10, p: float = 0.35
) -> DataflowGraph:
    """Random DAG where some operators fan out or deduplicate."""
    from dataclasses import replace

    from reconflow.graph import Arity

    g = random_dag(rng, max_n=max_n, p=p)
    updates = {}
    for v, meta in g.operators.items():
        if meta.is_sink:
            continue
        roll = rng.random()
        if roll < 0.20:
            updates[v] = replace(
                meta,
                arity=Arity.ONE_TO_MANY,
                per_edge_one_to_one=rng.random() < 0.5,
            )
        elif roll < 0.35 and not meta.is_source:
            updates[v] = replace(meta, uniqueness=True)
    return g.with_meta(updates) if updates else g


def enumerate_dag_edge_sets(n: int) -> Iterable[tuple[tuple[int, int], ...]]:
    """All DAGs on ``n`` vertices, one per isomorphism class.

    Every DAG admits a topological labeling, so the edge subsets of the
    total order on ``0 .. n-1`` cover every shape exactly once.
    """
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    for mask in range(1 << len(pairs)):
        yield tuple(pairs[i] for i in range(len(pairs)) if mask >> i & 1)


# -- covering sub-DAG oracle -----------------------------------------------


def path_elements(
    children: dict[str, Sequence[str]], a: str, b: str
) -> tuple[set[str], set[tuple[str, str]]]:
    """Vertices and edges on every directed path from ``a`` to ``b``."""
    verts: set[str] = set()
    edges: set[tuple[str, str]] = set()
    path = [a]

    def walk(v: str) -> None:
        if v == b:
            verts.update(path)
            edges.update((path[i], path[i + 1]) for i in range(len(path) - 1))
            return
        for c in children.get(v, ()):
            path.append(c)
            walk(c)
            path.pop()

    walk(a)
    return verts, edges


def oracle_mcs(
    graph: DataflowGraph, m: Iterable[str]
) -> tuple[frozenset[str], frozenset[tuple[str, str]]]:
    """Covering sub-DAG built by explicit path enumeration."""
    m = set(m)
    children = {v: list(graph.children(v)) for v in graph.operators}
    verts: set[str] = set(m)
    edges: set[tuple[str, str]] = set()
    for a, b in itertools.permutations(m, 2):
        pv, pe = path_elements(children, a, b)
        verts |= pv
        edges |= pe
    return frozenset(verts), frozenset(edges)


def oracle_mcs_literal(
    graph: DataflowGraph, m: Iterable[str]
) -> tuple[frozenset[str], frozenset[tuple[str, str]]]:
    """Covering sub-DAG by enumerating every candidate and taking the
    unique minimal one.  Only usable on very small graphs."""
    m = frozenset(m)
    all_v = list(graph.operators)
    all_e = list(graph.edges)
    children = {v: list(graph.children(v)) for v in graph.operators}
    path_cache = {
        (a, b): path_elements(children, a, b) for a in m for b in m if a != b
    }

    def satisfies(vs: frozenset[str], es: frozenset[tuple[str, str]]) -> bool:
        if not m <= vs:
            return False
        for pv, pe in path_cache.values():
            if not (pv <= vs and pe <= es):
                return False
        return True

    candidates = []
    extra_v = [v for v in all_v if v not in m]
    for k in range(len(extra_v) + 1):
        for vs_extra in itertools.combinations(extra_v, k):
            vs = m | frozenset(vs_extra)
            within = [e for e in all_e if e[0] in vs and e[1] in vs]
            for j in range(len(within) + 1):
                for es in itertools.combinations(within, j):
                    if satisfies(vs, frozenset(es)):
                        candidates.append((vs, frozenset(es)))

    minimal = [
        (vs, es)
        for vs, es in candidates
        if not any(
            (ovs < vs and oes <= es) or (ovs <= vs and oes < es)
            for ovs, oes in candidates
        )
    ]
    assert len(set(minimal)) == 1, "covering sub-DAG should be unique"
    return minimal[0]


# -- component oracle --------------------------------------------------------


def oracle_components(
    vertices: Iterable[str], edges: Iterable[tuple[str, str]]
) -> list[tuple[frozenset[str], frozenset[str], int]]:
    """(members, heads, longest path) per weak component, via union-find."""
    vertices = list(vertices)
    edges = list(edges)
    parent = {v: v for v in vertices}

    def find(v: str) -> str:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b in edges:
        parent[find(a)] = find(b)

    groups: dict[str, set[str]] = {}
    for v in vertices:
        groups.setdefault(find(v), set()).add(v)

    out = []
    for members in groups.values():
        inner = [(a, b) for a, b in edges if a in members]
        heads = frozenset(members - {b for _, b in inner})
        out.append((frozenset(members), heads, _longest_path_brute(members, inner)))
    out.sort(key=lambda t: min(t[0]))
    return out


def _longest_path_brute(members: set[str], edges: list[tuple[str, str]]) -> int:
    children: dict[str, list[str]] = {v: [] for v in members}
    for a, b in edges:
        children[a].append(b)

    def depth(v: str) -> int:
        return 1 + max((depth(c) for c in children[v]), default=-1)

    return max((depth(v) for v in members), default=0)


def random_log(rng: random.Random, max_txns: int = 5, max_workers: int = 4):
    """Arbitrary small schedule log: not engine output, pure interleaving.

    Some transactions revisit a worker (fan-out shapes do that), the
    update hits a random worker subset, and the global order is shuffled.
    """
    from reconflow.engine.log import ScheduleLog

    workers = [f"W{i}" for i in range(1, rng.randint(2, max_workers) + 1)]
    txn_ids = [f"t{i}" for i in range(1, rng.randint(1, max_txns) + 1)]
    events = []
    for txn in txn_ids:
        visited = rng.sample(workers, rng.randint(1, len(workers)))
        for w in visited:
            for k in range(1 if rng.random() < 0.8 else 2):
                events.append(("phi", w, txn, k))
    if rng.random() < 0.9:
        for w in rng.sample(workers, rng.randint(1, len(workers))):
            events.append(("mu", w, None, 0))
    rng.shuffle(events)
    log = ScheduleLog()
    uid = 0
    for i, (kind, w, txn, _k) in enumerate(events):
        if kind == "phi":
            uid += 1
            log.append_phi(w, w, vtime=i, txn_id=txn, uid=f"{txn}.{uid}",
                           parent_uid=None, version_tag=1, config_id="c1")
        else:
            log.append_mu(w, w, vtime=i, request_id=1, config_id="c2")
    return log
