"""Experiment orchestration: repetition runs and metric aggregation.

An :class:`ExperimentSpec` is pure data (JSON round-trippable).  The runner
executes one engine per seed, collects per-repetition outcomes, and folds
them into a :class:`MetricsReport` with normal-approximation confidence
intervals.  CSV rows use the fixed (event, time_ms, value) shape.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..engine import (DeterministicEngine, EngineError, RunConfig,
                      SourceSchedule, ThreadedEngine)
from ..engine.functions import ResolvedUpdate
from ..engine.plan import ReconfigPlan
from ..graph import DataflowGraph, expand_parallel, expand_targets, find_mcs
from ..graph.reconfig_set import extend_reconfig_set
from ..schedulers import (schedule_epoch, schedule_fries,
                          schedule_multi_version, schedule_naive_fcm)
from .registry import make_update
from .workflows import build_workflow

WINDOW_US = 10_000_000  # latency window width
WINDOW_STEP_US = 1_000_000
CI_Z = 1.96
CI_MIN_REPS = 10


@dataclass
class ExperimentSpec:
    workflow: str
    scheduler: str = "fries"
    options: dict[str, bool] = field(default_factory=dict)
    updates: list[dict[str, Any]] = field(default_factory=list)
    # (at_us, tuples per second); the first entry sets the initial rate
    rates: list[tuple[int, float]] = field(default_factory=lambda: [(0, 500.0)])
    cost_overrides: dict[str, float] = field(default_factory=dict)
    worker_counts: dict[str, int] = field(default_factory=dict)
    # straggler knob: per-worker cost multiplier, applied after expansion
    skew: dict[str, float] = field(default_factory=dict)
    inject_at_us: list[int] = field(default_factory=list)
    duration_us: int = 30_000_000
    tuples_per_source: int | None = None
    seeds: list[int] = field(default_factory=list)
    repetitions: int = 1
    workflow_params: dict[str, Any] = field(default_factory=dict)
    # engine knobs; None keeps the RunConfig default
    channel_capacity: int | None = None
    fcm_base_us: int | None = None
    fcm_jitter_us: int | None = None
    stop_after_reconfig: bool = False

    def validate(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.rates:
            raise ValueError("rates must not be empty")
        for at, rate in self.rates:
            if rate <= 0:
                raise ValueError(f"rates must be positive, got {rate} at {at}")
            if at < 0:
                raise ValueError("rate-change times must be >= 0")
        for t in self.inject_at_us:
            if not 0 <= t < self.duration_us:
                raise ValueError(
                    f"injection time {t} outside run bound {self.duration_us}")
        if self.scheduler not in PLANNERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")

    def effective_seeds(self) -> list[int]:
        seeds = list(self.seeds)
        while len(seeds) < self.repetitions:
            seeds.append((seeds[-1] + 1) if seeds else 0)
        return seeds[: max(self.repetitions, len(self.seeds))]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rates"] = [list(r) for r in self.rates]
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec fields: {sorted(extra)}")
        kw = dict(d)
        if "rates" in kw:
            kw["rates"] = [tuple(r) for r in kw["rates"]]
        return cls(**kw)


def parse_updates(entries: Sequence[Mapping[str, Any]]) -> dict[str, ResolvedUpdate]:
    request: dict[str, ResolvedUpdate] = {}
    for e in entries:
        op = e["operator"]
        request[op] = make_update(
            e.get("new_function"),
            e.get("params"),
            e.get("state_transform", "identity"),
            config_id=e.get("config_id"),
        )
    return request


PLANNERS = {
    "epoch": lambda g, req, opt: schedule_epoch(g, req),
    "naive": lambda g, req, opt: schedule_naive_fcm(g, req),
    "multiversion": lambda g, req, opt: schedule_multi_version(g, req),
    "fries": lambda g, req, opt: schedule_fries(
        g, req,
        extended=opt.get("extended", True),
        pruning=opt.get("pruning", True)),
}


def build_plan(graph: DataflowGraph, spec: ExperimentSpec) -> ReconfigPlan:
    request = parse_updates(spec.updates)
    return PLANNERS[spec.scheduler](graph, request, spec.options)


def prepared_graph(spec: ExperimentSpec):
    wf = build_workflow(spec.workflow, **spec.workflow_params)
    g = wf.graph
    if spec.worker_counts:
        g = g.with_worker_counts(spec.worker_counts)
    if spec.cost_overrides:
        g = g.with_meta({op: replace(g.meta(op), cost_ms=ms)
                         for op, ms in spec.cost_overrides.items()})
    g = expand_parallel(g)
    if spec.skew:
        g = g.with_meta({w: replace(g.meta(w), cost_ms=g.meta(w).cost_ms * k)
                         for w, k in spec.skew.items()})
    return g, wf.functions


def _source_schedules(spec: ExperimentSpec, graph: DataflowGraph):
    rates = sorted(spec.rates)
    first = rates[0][1]
    interval = max(1, round(1_000_000 / first))
    changes = tuple((at, max(1, round(1_000_000 / r))) for at, r in rates[1:])
    limit = spec.tuples_per_source
    return {
        s: SourceSchedule(interval_us=interval, limit=limit, changes=changes)
        for s in graph.sources()
    }


@dataclass
class RepOutcome:
    """One repetition, reduced to plain data so it crosses process pools."""

    seed: int
    # per request: (status, delay_us or None)
    requests: list[tuple[str, int | None]]
    # (sink receipt vtime_us, end-to-end latency_us)
    latencies: list[tuple[int, int]]
    # sink receipt vtimes of tuples flagged invalid
    invalid_at_us: list[int]
    sink_count: int
    tuples_processed: int
    final_vtime_us: int


def run_one(spec: ExperimentSpec, seed: int,
            mode: str = "deterministic") -> RepOutcome:
    graph, functions = prepared_graph(spec)
    cls = {"deterministic": DeterministicEngine, "threaded": ThreadedEngine}
    try:
        engine_cls = cls[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; choose from {sorted(cls)}")
    cfg = RunConfig(seed=seed, max_vtime_us=spec.duration_us,
                    stop_after_reconfig=spec.stop_after_reconfig)
    if spec.channel_capacity is not None:
        cfg = replace(cfg, channel_capacity=spec.channel_capacity)
    if spec.fcm_base_us is not None:
        cfg = replace(cfg, fcm_base_us=spec.fcm_base_us)
    if spec.fcm_jitter_us is not None:
        cfg = replace(cfg, fcm_jitter_us=spec.fcm_jitter_us)
    eng = engine_cls(
        graph, functions,
        config=cfg,
        sources=_source_schedules(spec, graph),
    )
    for t in spec.inject_at_us:
        eng.schedule_reconfiguration(t, build_plan(graph, spec))
    try:
        res = eng.run()
    except EngineError as e:
        raise EngineError(f"seed {seed}: {e}") from e
    return RepOutcome(
        seed=seed,
        requests=[(r.status, r.delay_us) for r in res.reconfig_reports],
        latencies=[(s.vtime, s.vtime - s.source_vtime)
                   for s in res.sink_records],
        invalid_at_us=[s.vtime for s in res.sink_records
                       if s.payload.get("invalid")],
        sink_count=len(res.sink_records),
        tuples_processed=res.tuples_processed,
        final_vtime_us=res.final_vtime,
    )


def _pool_entry(args):
    spec_dict, seed, mode = args
    return run_one(ExperimentSpec.from_dict(spec_dict), seed, mode)


def mean_ci(values: Sequence[float]) -> tuple[float, float | None]:
    """Sample mean and 95% CI half-width; None below the rep threshold."""
    vals = list(values)
    m = statistics.fmean(vals)
    if len(vals) < CI_MIN_REPS:
        return m, None
    sd = statistics.stdev(vals)
    return m, CI_Z * sd / math.sqrt(len(vals))


@dataclass
class MetricsReport:
    spec: ExperimentSpec
    mode: str
    outcomes: list[RepOutcome]
    # aggregates, all in milliseconds where time-like
    delays: list[dict[str, Any]] = field(default_factory=list)
    latency_windows: list[dict[str, Any]] = field(default_factory=list)
    invalid_series: list[dict[str, Any]] = field(default_factory=list)
    invalid_total: dict[str, Any] = field(default_factory=dict)
    mcs_components: list[dict[str, Any]] = field(default_factory=list)
    channels_total: int = 0
    channels_mcs: int | None = None
    sink_tuples: dict[str, Any] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, float, float]]:
        out: list[tuple[str, float, float]] = []
        sched = self.spec.scheduler
        for d in self.delays:
            tag = f"reconfig_delay_ms.{sched}.r{d['index']}"
            out.append((tag, d["inject_ms"], d["mean_ms"]))
            if d["ci_ms"] is not None:
                out.append((tag + ".ci", d["inject_ms"], d["ci_ms"]))
        for w in self.latency_windows:
            out.append(("latency_ms", w["end_ms"], w["mean_ms"]))
            if w["ci_ms"] is not None:
                out.append(("latency_ms.ci", w["end_ms"], w["ci_ms"]))
        for p in self.invalid_series:
            out.append((f"invalid_cum.{sched}", p["t_ms"], p["mean"]))
        if self.invalid_total:
            out.append((f"invalid_total.{sched}",
                        self.spec.duration_us / 1000,
                        self.invalid_total["mean"]))
        out.append(("channels.total", 0.0, float(self.channels_total)))
        if self.channels_mcs is not None:
            out.append(("channels.mcs", 0.0, float(self.channels_mcs)))
        for i, c in enumerate(self.mcs_components):
            out.append((f"mcs.size.c{i}", 0.0, float(c["size"])))
            out.append((f"mcs.longest_path.c{i}", 0.0,
                        float(c["longest_path"])))
        if self.sink_tuples:
            out.append(("sink_tuples", self.spec.duration_us / 1000,
                        self.sink_tuples["mean"]))
        return out

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "mode": self.mode,
            "seeds": [o.seed for o in self.outcomes],
            "delays": self.delays,
            "latency_windows": self.latency_windows,
            "invalid_series": self.invalid_series,
            "invalid_total": self.invalid_total,
            "mcs_components": self.mcs_components,
            "channels_total": self.channels_total,
            "channels_mcs": self.channels_mcs,
            "sink_tuples": self.sink_tuples,
        }

    def write(self, outdir: str | Path, name: str | None = None) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        name = name or f"{self.spec.workflow}-{self.spec.scheduler}"
        csv_path = outdir / f"{name}.csv"
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("event", "time_ms", "value"))
            w.writerows(self.rows())
        json_path = outdir / f"{name}.json"
        json_path.write_text(json.dumps(self.to_dict(), indent=2,
                                        sort_keys=True))
        return [csv_path, json_path]


def _window_series(outcomes: list[RepOutcome],
                   duration_us: int) -> list[dict[str, Any]]:
    windows = []
    start = 0
    while start < duration_us:
        end = start + WINDOW_US
        per_rep = []
        for o in outcomes:
            vals = [lat for t, lat in o.latencies if start <= t < end]
            if vals:
                per_rep.append(statistics.fmean(vals) / 1000)
        if per_rep:
            m, ci = mean_ci(per_rep)
            windows.append({"start_ms": start / 1000, "end_ms": end / 1000,
                            "mean_ms": m, "ci_ms": ci, "n": len(per_rep)})
        start += WINDOW_STEP_US
    return windows


def _invalid_series(outcomes: list[RepOutcome],
                    duration_us: int) -> list[dict[str, Any]]:
    series = []
    t = WINDOW_STEP_US
    while t <= duration_us:
        cums = [sum(1 for at in o.invalid_at_us if at < t) for o in outcomes]
        series.append({"t_ms": t / 1000, "mean": statistics.fmean(cums)})
        t += WINDOW_STEP_US
    return series


def _static_analysis(spec: ExperimentSpec, graph: DataflowGraph):
    """Channel and component figures that depend only on the plan."""
    total = len(graph.edges)
    if spec.scheduler != "fries" or not spec.updates:
        return total, None, []
    targets = expand_targets(graph, [e["operator"] for e in spec.updates])
    if spec.options.get("extended", True):
        members = extend_reconfig_set(
            graph, targets, pruning=spec.options.get("pruning", True))
    else:
        members = frozenset(targets)
    res = find_mcs(graph, members)
    comps = [{"heads": sorted(c.heads), "size": len(c.vertices),
              "longest_path": c.longest_path_len,
              "channels": len(c.edges)} for c in res.components]
    return total, sum(c["channels"] for c in comps), comps


def run_experiment(spec: ExperimentSpec, *, mode: str = "deterministic",
                   outdir: str | Path | None = None,
                   parallel: bool = False) -> MetricsReport:
    spec.validate()
    seeds = spec.effective_seeds()
    if parallel and len(seeds) > 1:
        with ProcessPoolExecutor() as pool:
            outcomes = list(pool.map(
                _pool_entry, [(spec.to_dict(), s, mode) for s in seeds]))
    else:
        outcomes = [run_one(spec, s, mode) for s in seeds]

    report = MetricsReport(spec=spec, mode=mode, outcomes=outcomes)
    n_requests = min((len(o.requests) for o in outcomes), default=0)
    for i in range(n_requests):
        delays = [o.requests[i][1] for o in outcomes
                  if o.requests[i][1] is not None]
        statuses = sorted({o.requests[i][0] for o in outcomes})
        entry = {"index": i, "scheduler": spec.scheduler,
                 "inject_ms": (spec.inject_at_us[i] / 1000
                               if i < len(spec.inject_at_us) else 0.0),
                 "statuses": statuses, "n": len(delays)}
        if delays:
            m, ci = mean_ci([d / 1000 for d in delays])
            entry.update(mean_ms=m, ci_ms=ci,
                         per_seed_ms=[d / 1000 for d in delays])
        else:
            entry.update(mean_ms=float("nan"), ci_ms=None, per_seed_ms=[])
        report.delays.append(entry)

    report.latency_windows = _window_series(outcomes, spec.duration_us)
    report.invalid_series = _invalid_series(outcomes, spec.duration_us)
    totals = [len(o.invalid_at_us) for o in outcomes]
    m, ci = mean_ci([float(t) for t in totals])
    report.invalid_total = {"mean": m, "ci": ci, "per_seed": totals}
    counts = [float(o.sink_count) for o in outcomes]
    m, ci = mean_ci(counts)
    report.sink_tuples = {"mean": m, "ci": ci}

    graph, _ = prepared_graph(spec)
    total, mcs_ch, comps = _static_analysis(spec, graph)
    report.channels_total = total
    report.channels_mcs = mcs_ch
    report.mcs_components = comps

    if outdir is not None:
        report.write(outdir)
    return report
