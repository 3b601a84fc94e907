"""Randomized safety campaigns.

Each case draws a workflow, a target set, an injection time, and traffic
volume from a seeded generator, runs one reconfiguration, and feeds the
schedule log to the serializability checker.  Failures shrink traffic and
injection time while the verdict stays bad, so the reported case is small
enough to read.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

from ..engine import DeterministicEngine, RunConfig, RunResult, SourceSchedule
from ..engine.functions import ResolvedUpdate
from ..txncheck import (audit_version_consistency, check_conflict_serializable)
from .experiments import PLANNERS
from .registry import make_update
from .workflows import Workflow, build_workflow

ONE_TO_ONE_GRAPHS = ("fig2", "fig7", "fig9", "w2", "w3")
ONE_TO_MANY_GRAPHS = ("fig10", "fig11a", "fig11b", "fig11c", "fig12",
                      "w4", "w5")
ALL_GRAPHS = ONE_TO_ONE_GRAPHS + ONE_TO_MANY_GRAPHS


@dataclass(frozen=True)
class FuzzCase:
    workflow: str
    scheduler: str
    seed: int
    targets: tuple[str, ...]
    inject_at_us: int
    limit: int
    interval_us: int
    extended: bool = True
    pruning: bool = True

    def describe(self) -> str:
        opts = ""
        if self.scheduler == "fries":
            opts = f" extended={self.extended} pruning={self.pruning}"
        return (f"seed={self.seed} workflow={self.workflow} "
                f"scheduler={self.scheduler}{opts} targets={self.targets} "
                f"inject_at_us={self.inject_at_us} limit={self.limit} "
                f"interval_us={self.interval_us}")


@dataclass
class FuzzOutcome:
    case: FuzzCase
    serializable: bool
    witness: dict | None
    audit_ok: bool
    retired: bool
    status: str

    @property
    def ok(self) -> bool:
        return self.serializable and self.audit_ok


def _updatable_ops(wf: Workflow) -> list[str]:
    g = wf.graph
    return sorted(op for op in g.operators
                  if not g.meta(op).is_source
                  and not g.meta(op).synthetic_replicate)


def _clone_update(wf: Workflow, op: str, config_id: str) -> ResolvedUpdate:
    fn = wf.functions.get(op)
    if fn is None or fn.spec is None:
        # sinks must not emit; everything else defaults to pass-through
        name = "swallow" if wf.graph.meta(op).is_sink else "pass_through"
        return make_update(name, config_id=config_id)
    return make_update(fn.spec.name, fn.spec.params, config_id=config_id)


def build_case(seed: int, scheduler: str,
               graphs: Sequence[str] = ALL_GRAPHS, *,
               extended: bool = True,
               pruning: bool | None = None) -> FuzzCase:
    rng = random.Random(f"{scheduler}:{seed}")
    name = rng.choice(list(graphs))
    wf = build_workflow(name)
    ops = _updatable_ops(wf)
    targets = tuple(sorted(rng.sample(ops, rng.randint(1, min(3, len(ops))))))
    return FuzzCase(
        workflow=name, scheduler=scheduler, seed=seed, targets=targets,
        inject_at_us=rng.randrange(2_000, 30_000),
        limit=rng.randint(8, 25),
        interval_us=rng.choice((600, 900, 1_200, 1_500)),
        extended=extended,
        pruning=rng.random() < 0.5 if pruning is None else pruning,
    )


def run_case(case: FuzzCase) -> tuple[FuzzOutcome, RunResult]:
    wf = build_workflow(case.workflow)
    request = {
        op: _clone_update(wf, op, f"cfg-r{case.seed}")
        for op in case.targets
    }
    options = {"extended": case.extended, "pruning": case.pruning}
    plan = PLANNERS[case.scheduler](wf.graph, request, options)
    eng = DeterministicEngine(
        wf.graph, wf.functions,
        config=RunConfig(seed=case.seed, max_vtime_us=10_000_000),
        sources={s: SourceSchedule(interval_us=case.interval_us,
                                   limit=case.limit)
                 for s in wf.graph.sources()},
    )
    eng.schedule_reconfiguration(case.inject_at_us, plan)
    res = eng.run()
    verdict = check_conflict_serializable(res.log)
    audit_ok = True
    if case.scheduler == "multiversion":
        audit_ok, _ = audit_version_consistency(res.log, res.reconfig_reports)
    status = res.reconfig_reports[0].status if res.reconfig_reports else "none"
    outcome = FuzzOutcome(
        case=case,
        serializable=verdict.serializable,
        witness=verdict.witness.as_dict() if verdict.witness else None,
        audit_ok=audit_ok,
        retired=eng.dual_state_workers == [],
        status=status,
    )
    return outcome, res


def shrink_case(case: FuzzCase) -> tuple[FuzzCase, FuzzOutcome]:
    """Smallest still-failing variant along traffic volume and timing."""
    best_case = case
    best, _ = run_case(case)
    assert not best.ok, "only failing cases shrink"
    limit = case.limit
    while limit > 1:
        limit -= 1
        cand = replace(best_case, limit=limit)
        out, _ = run_case(cand)
        if not out.ok:
            best_case, best = cand, out
    inject = best_case.inject_at_us
    while inject > 1_000:
        inject -= 1_000
        cand = replace(best_case, inject_at_us=inject)
        out, _ = run_case(cand)
        if not out.ok:
            best_case, best = cand, out
    return best_case, best


def fuzz_campaign(scheduler: str, graphs: Sequence[str], seeds: range, *,
                  extended: bool = True, pruning: bool | None = None,
                  shrink: bool = True) -> list[FuzzOutcome]:
    """Run the campaign; return only failing outcomes (shrunk)."""
    failures: list[FuzzOutcome] = []
    for seed in seeds:
        case = build_case(seed, scheduler, graphs,
                          extended=extended, pruning=pruning)
        outcome, _ = run_case(case)
        if not outcome.ok:
            if shrink:
                _, outcome = shrink_case(case)
            failures.append(outcome)
    return failures
