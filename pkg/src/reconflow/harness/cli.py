"""Command-line entry point.

Subcommands
    run    execute an experiment spec file, write metrics CSV + JSON
    check  run the serializability checker over a schedule-log file
    plan   print reconfiguration-set components for a workflow + request
    fuzz   randomized safety campaign with failing-case shrinking
    bench  reconfiguration-delay sweeps over rates and costs, CSV out

Exit codes: 0 ok, 1 usage or bad input, 2 checker violation,
3 engine error.  The output directory defaults to $RECONFLOW_OUTDIR,
then the current directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from ..engine import EngineError
from ..engine.log import ScheduleLog
from ..graph import expand_parallel
from ..graph.schema import load_graph
from ..txncheck import check_conflict_serializable
from .experiments import (ExperimentSpec, PLANNERS, build_plan, mean_ci,
                          parse_updates, run_experiment)
from .fuzz import (ALL_GRAPHS, ONE_TO_MANY_GRAPHS, ONE_TO_ONE_GRAPHS,
                   FuzzCase, build_case, run_case, shrink_case)
from .workflows import build_workflow, workflow_names

OK, USAGE, VIOLATION, ENGINE_FAILURE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract wants 1
    def error(self, message):
        raise UsageError(message)


def _outdir(args) -> Path:
    if getattr(args, "outdir", None):
        return Path(args.outdir)
    return Path(os.environ.get("RECONFLOW_OUTDIR", "."))


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read {path}: {e}")


def _request_graph(args):
    """Graph for plan/fuzz: catalog name or schema file."""
    if args.graph_file:
        graph, _fns = load_graph(args.graph_file)
        return expand_parallel(graph)
    params = json.loads(args.params) if args.params else {}
    wf = build_workflow(args.workflow, **params)
    return expand_parallel(wf.graph)


# ------------------------------------------------------------------ run


def _cmd_run(args) -> int:
    doc = _load_json(args.spec)
    try:
        spec = ExperimentSpec.from_dict(doc)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad spec: {e}")
    if args.seed is not None:
        spec.seeds = [args.seed]
    if args.reps is not None:
        spec.repetitions = args.reps
    try:
        spec.validate()
    except ValueError as e:
        raise UsageError(str(e))
    report = run_experiment(spec, mode=args.mode, parallel=args.parallel)
    outdir = _outdir(args)
    paths = report.write(outdir, args.name)
    if args.write_log:
        # re-run the first seed once more to capture its schedule log
        from ..engine import DeterministicEngine, RunConfig
        from .experiments import _source_schedules, prepared_graph
        graph, functions = prepared_graph(spec)
        eng = DeterministicEngine(
            graph, functions,
            config=RunConfig(seed=spec.effective_seeds()[0],
                             max_vtime_us=spec.duration_us),
            sources=_source_schedules(spec, graph))
        for t in spec.inject_at_us:
            eng.schedule_reconfiguration(t, build_plan(graph, spec))
        res = eng.run()
        log_path = outdir / f"{paths[0].stem}.log"
        log_path.write_text("\n".join(res.log.export_lines()) + "\n")
        paths.append(log_path)
    for p in paths:
        print(p)
    for d in report.delays:
        ci = f" ±{d['ci_ms']:.1f}" if d["ci_ms"] is not None else ""
        print(f"request {d['index']} ({d['scheduler']}): "
              f"{d['mean_ms']:.1f}ms{ci} over {d['n']} reps, "
              f"statuses {','.join(d['statuses'])}")
    return OK


# ------------------------------------------------------------------ check


def _cmd_check(args) -> int:
    try:
        lines = Path(args.log).read_text().splitlines()
    except OSError as e:
        raise UsageError(str(e))
    try:
        log = ScheduleLog.from_lines(lines)
        verdict = check_conflict_serializable(log)
    except ValueError as e:
        raise UsageError(f"bad log: {e}")
    print(verdict.to_json())
    return OK if verdict.serializable else VIOLATION


# ------------------------------------------------------------------ plan


def _cmd_plan(args) -> int:
    doc = _load_json(args.request)
    try:
        scheduler = doc["scheduler"]
        options = doc.get("options", {})
        request = parse_updates(doc.get("updates", []))
        if scheduler not in PLANNERS:
            raise UsageError(f"unknown scheduler {scheduler!r}")
        graph = _request_graph(args)
        plan = PLANNERS[scheduler](graph, request, options)
    except (KeyError, ValueError) as e:
        raise UsageError(str(e))

    components = plan.info.get("components", [])
    out = {
        "scheduler": plan.scheduler,
        "options": dict(options),
        "targets": sorted(doc_u["operator"] for doc_u in doc.get("updates", [])),
        "members": sorted(plan.updates),
        "fcm_targets": sorted(plan.fcm_targets),
        "components": [
            {"vertices": sorted(c["vertices"]),
             "heads": sorted(c["heads"]),
             "longest_path": c["longest_path"]}
            for c in components
        ],
        "channels_total": len(graph.edges),
        "channels_mcs": sum(
            1 for a, b in graph.edges
            for c in components
            if a in c["vertices"] and b in c["vertices"]),
    }
    if args.json:
        print(json.dumps(out, indent=2, sort_keys=True))
        return OK
    print(f"scheduler: {out['scheduler']}"
          + (f" {options}" if options else ""))
    print(f"targets:   {', '.join(out['targets'])}")
    print(f"members:   {', '.join(out['members'])}")
    for c in out["components"]:
        pretty = ", ".join(
            f"{v}*" if v in c["heads"] else v for v in c["vertices"])
        print(f"component: {{{pretty}}} longest_path={c['longest_path']}")
    print(f"channels:  total={out['channels_total']} "
          f"in_components={out['channels_mcs']}")
    return OK


# ------------------------------------------------------------------ fuzz


def _cmd_fuzz(args) -> int:
    pools = {"one_to_one": ONE_TO_ONE_GRAPHS, "one_to_many": ONE_TO_MANY_GRAPHS,
             "all": ALL_GRAPHS}
    graphs = args.graphs.split(",") if args.graphs else list(pools[args.pool])
    unknown = [g for g in graphs if g not in workflow_names()]
    if unknown:
        raise UsageError(f"unknown workflows: {unknown}")
    failures = []
    for seed in range(args.seeds):
        if args.targets:
            case = FuzzCase(
                workflow=graphs[0], scheduler=args.scheduler, seed=seed,
                targets=tuple(args.targets.split(",")),
                inject_at_us=args.inject_us, limit=args.limit,
                interval_us=args.interval_us,
                extended=args.extended,
                pruning=True if args.pruning is None else args.pruning)
        else:
            case = build_case(seed, args.scheduler, graphs,
                              extended=args.extended, pruning=args.pruning)
        try:
            outcome, _ = run_case(case)
        except EngineError as e:
            print(f"engine error on {case.describe()}: {e}", file=sys.stderr)
            return ENGINE_FAILURE
        if not outcome.ok:
            small, final = shrink_case(case)
            failures.append(final)
            print(f"FAIL {small.describe()}")
            if final.witness:
                print(f"     witness {json.dumps(final.witness)}")
            if not args.expect_safe and args.first:
                break
    print(f"{len(failures)} failing case(s) in {args.seeds} seeds")
    if args.expect_safe and failures:
        return VIOLATION
    return OK


# ------------------------------------------------------------------ bench


def _cmd_bench(args) -> int:
    rates = [float(r) for r in args.rates.split(",")]
    costs = [float(c) for c in args.costs.split(",")]
    schedulers = args.schedulers.split(",")
    for s in schedulers:
        if s not in PLANNERS:
            raise UsageError(f"unknown scheduler {s!r}")
    rows = []
    for sched in schedulers:
        for rate in rates:
            for cost in costs:
                spec = ExperimentSpec(
                    workflow=args.workflow,
                    scheduler=sched,
                    updates=[{"operator": args.op,
                              "new_function": "pass_through",
                              "config_id": f"cfg-{sched}"}],
                    rates=[(0, rate)],
                    cost_overrides={args.op: cost},
                    inject_at_us=args.inject_us,
                    duration_us=args.max_vtime_us,
                    tuples_per_source=int(rate * (args.inject_us[0] / 1e6 + 1)),
                    seeds=[args.seed],
                    repetitions=args.reps,
                    channel_capacity=1_000_000,
                    stop_after_reconfig=True,
                )
                try:
                    rep = run_experiment(spec, mode=args.mode)
                except EngineError as e:
                    print(str(e), file=sys.stderr)
                    return ENGINE_FAILURE
                d = rep.delays[0]
                rows.append((f"delay_ms.{sched}.rate{rate:g}.cost{cost:g}",
                             d["inject_ms"], d["mean_ms"]))
                print(f"{sched} rate={rate:g}/s cost={cost:g}ms -> "
                      f"{d['mean_ms']:.1f}ms")
    out = _outdir(args) / (args.name + ".csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("event", "time_ms", "value"))
        w.writerows(rows)
    print(out)
    return OK


# ------------------------------------------------------------------ parser


def _build_parser() -> _Parser:
    p = _Parser(prog="reconflow", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="execute an experiment spec file")
    run.add_argument("spec")
    run.add_argument("--outdir")
    run.add_argument("--name", help="basename for output files")
    run.add_argument("--seed", type=int)
    run.add_argument("--mode", choices=("deterministic", "threaded"),
                     default="deterministic")
    run.add_argument("--reps", type=int)
    run.add_argument("--parallel", action="store_true",
                     help="run repetitions in separate processes")
    run.add_argument("--write-log", action="store_true",
                     help="also dump the first seed's schedule log")
    run.set_defaults(fn=_cmd_run)

    chk = sub.add_parser("check", help="serializability-check a log file")
    chk.add_argument("log")
    chk.set_defaults(fn=_cmd_check)

    plan = sub.add_parser("plan", help="show components for a request")
    plan.add_argument("--workflow", choices=workflow_names())
    plan.add_argument("--params", help="workflow parameters, JSON object")
    plan.add_argument("--graph-file", help="graph definition JSON instead "
                                           "of a catalog workflow")
    plan.add_argument("--request", required=True,
                      help="reconfiguration request file")
    plan.add_argument("--json", action="store_true")
    plan.set_defaults(fn=_cmd_plan)

    fz = sub.add_parser("fuzz", help="randomized safety campaign")
    fz.add_argument("--scheduler", required=True,
                    choices=tuple(sorted(PLANNERS)))
    fz.add_argument("--pool", choices=("one_to_one", "one_to_many", "all"),
                    default="all")
    fz.add_argument("--graphs", help="comma-separated workflow names")
    fz.add_argument("--seeds", type=int, default=200)
    fz.add_argument("--targets", help="fixed targets (directed hunt)")
    fz.add_argument("--inject-us", type=int, default=8_000)
    fz.add_argument("--limit", type=int, default=20)
    fz.add_argument("--interval-us", type=int, default=1_000)
    fz.add_argument("--extended", action=argparse.BooleanOptionalAction,
                    default=True)
    fz.add_argument("--pruning", action=argparse.BooleanOptionalAction,
                    default=None)
    fz.add_argument("--expect-safe", action="store_true",
                    help="exit 2 if any failure is found")
    fz.add_argument("--first", action="store_true",
                    help="stop at the first failure")
    fz.set_defaults(fn=_cmd_fuzz)

    bench = sub.add_parser("bench", help="delay sweeps, CSV out")
    bench.add_argument("--workflow", default="w1")
    bench.add_argument("--op", default="FD",
                       help="operator whose cost is swept and reconfigured")
    bench.add_argument("--schedulers", default="epoch,fries")
    bench.add_argument("--rates", default="500,1000,1500,2000,2500")
    bench.add_argument("--costs", default="10,50")
    bench.add_argument("--inject-us", type=int, nargs="+",
                       default=[2_000_000])
    bench.add_argument("--max-vtime-us", type=int, default=600_000_000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--mode", choices=("deterministic", "threaded"),
                       default="deterministic")
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--outdir")
    bench.add_argument("--name", default="bench")
    bench.set_defaults(fn=_cmd_bench)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except EngineError as e:
        print(f"engine error: {e}", file=sys.stderr)
        return ENGINE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
