"""Deterministic virtual-time execution.

One logical event loop drives every worker.  At each step the engine
collects all runnable actions (scheduled controller work, control-message
handling, data consumption, source emission), takes the earliest virtual
time, and lets the seeded RNG pick among ties.  Identical inputs and seed
replay to a byte-identical schedule log.

Virtual time is integer microseconds.  A worker that starts a tuple at t
with cost c is busy until t + c; its outputs become visible to consumers
at t + c and its processing event carries vtime t + c.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter, deque
from dataclasses import dataclass, replace
from typing import Any, Mapping

from ..graph.model import DataflowGraph, OperatorId
from .controller import ControllerCore, Send
from .errors import EngineError
from .functions import OperatorFunction
from .log import ScheduleLog
from .messages import EpochMarker, Fcm, TupleMsg
from .plan import ReconfigPlan
from .records import Ack, CheckpointRecord, RunResult
from .worker import Effects, WorkerCore, Wiring


@dataclass
class RunConfig:
    seed: int = 0
    channel_capacity: int = 1024
    fcm_base_us: int = 2000
    fcm_jitter_us: int = 3000
    max_vtime_us: int | None = None
    sink_limit: int | None = None
    checkpoint_policy: str = "plain"  # plain | reconfig_safe
    stop_after_reconfig: bool = False


@dataclass
class SourceSchedule:
    """Emission pacing for one source worker.

    ``interval_us`` of None falls back to the operator's cost model.
    ``changes`` lists (at_us, new_interval_us) rate adjustments.
    """

    interval_us: int | None = None
    limit: int | None = None
    start_us: int = 0
    changes: tuple[tuple[int, int], ...] = ()

    def interval_at(self, t: int, default: int) -> int:
        interval = self.interval_us if self.interval_us is not None else default
        for at, new in self.changes:
            if t >= at:
                interval = new
        return interval


class _Channel:
    __slots__ = ("items",)

    def __init__(self) -> None:
        self.items: deque[tuple[int, Any]] = deque()

    def __len__(self) -> int:
        return len(self.items)

    def push(self, available_at: int, msg: Any) -> None:
        self.items.append((available_at, msg))

    def head_time(self) -> int:
        return self.items[0][0]

    def pop(self) -> Any:
        return self.items.popleft()[1]


class _SourceDriver:
    def __init__(self, schedule: SourceSchedule, default_interval: int) -> None:
        self.schedule = schedule
        self.default_interval = default_interval
        self.next_at = schedule.start_us
        self.emitted = 0

    @property
    def exhausted(self) -> bool:
        limit = self.schedule.limit
        return limit is not None and self.emitted >= limit

    def advance(self, now: int) -> None:
        self.emitted += 1
        self.next_at = now + self.schedule.interval_at(now, self.default_interval)


class DeterministicEngine:
    def __init__(
        self,
        graph: DataflowGraph,
        functions: Mapping[OperatorId, OperatorFunction] | None = None,
        *,
        config: RunConfig | None = None,
        sources: Mapping[OperatorId, SourceSchedule] | None = None,
    ) -> None:
        bad = [op for op in graph.operators if graph.meta(op).worker_count != 1]
        if bad:
            raise EngineError(
                f"engine needs a worker-level graph; expand_parallel first "
                f"(worker_count > 1 at {bad[:3]})"
            )
        self.graph = graph
        self.config = config or RunConfig()
        self.log = ScheduleLog()
        self._rng = random.Random(self.config.seed)
        functions = dict(functions or {})
        source_schedules = dict(sources or {})

        self._workers: dict[OperatorId, WorkerCore] = {}
        self._busy: dict[OperatorId, int] = {}
        self._channels: dict[tuple[OperatorId, OperatorId], _Channel] = {}
        self._inbox: dict[OperatorId, list[tuple[int, int, Fcm]]] = {}
        self._drivers: dict[OperatorId, _SourceDriver] = {}
        self._inbox_ord = 0

        for a, b in graph.edges:
            self._channels[(a, b)] = _Channel()

        for op in sorted(graph.operators):
            meta = graph.meta(op)
            logical = meta.logical(op)
            routes: dict[OperatorId, list[OperatorId]] = {}
            for child in graph.children(op):
                routes.setdefault(graph.meta(child).logical(child), []).append(child)
            wiring = Wiring(
                inputs=graph.parents(op),
                out_neighbors=graph.children(op),
                routes={t: tuple(sorted(ws, key=lambda w: graph.meta(w).worker_index))
                        for t, ws in routes.items()},
            )
            fn = functions.get(op, functions.get(logical))
            self._workers[op] = WorkerCore(op, meta, wiring, fn, self.log)
            self._busy[op] = 0
            self._inbox[op] = []
            if meta.is_source:
                sched = source_schedules.get(op, source_schedules.get(logical))
                default_cost = max(1, int(meta.cost_ms * 1000))
                self._drivers[op] = _SourceDriver(sched or SourceSchedule(), default_cost)

        self._worker_order = sorted(self._workers)
        self._source_workers = [w for w in self._worker_order
                                if graph.meta(w).is_source]
        self._sink_workers = [w for w in self._worker_order if graph.meta(w).is_sink]

        # scheduled controller work; the lifecycle lives in ControllerCore
        self._schedule: list[tuple[int, int, tuple]] = []
        self._sched_ord = 0
        self._next_request_id = 1
        self._next_ckpt_id = 1
        self._next_epoch = 1
        self._inflight: Counter = Counter()
        self.ctl = ControllerCore(
            source_workers=self._source_workers,
            sink_workers=self._sink_workers,
            worker_count=len(self._workers),
            config_lookup=lambda w: self._workers[w].fn.config_id,
            checkpoint_policy=self.config.checkpoint_policy,
            inflight_below=lambda v: sum(
                n for tag, n in self._inflight.items() if tag < v and n > 0),
            stamp=self._stamp,
        )

        # results
        self._sink_records: list = []
        self._crossings: list = []
        self._fcm_acks: list[Ack] = []
        self._tuples = 0
        self._now = 0
        self._ran = False

    # -------------------------------------------------------------- schedule

    def _push_action(self, at_us: int, action: tuple) -> None:
        heapq.heappush(self._schedule, (at_us, self._sched_ord, action))
        self._sched_ord += 1

    def schedule_reconfiguration(self, at_us: int, plan: ReconfigPlan) -> int:
        request_id = self._next_request_id
        self._next_request_id += 1
        self._push_action(at_us, ("reconfig", request_id, plan))
        return request_id

    def schedule_epoch(self, at_us: int) -> str:
        marker_id = f"epoch-{self._next_epoch}"
        self._next_epoch += 1
        self._push_action(at_us, ("epoch", marker_id))
        return marker_id

    def schedule_checkpoint(self, at_us: int) -> int:
        ckpt_id = self._next_ckpt_id
        self._next_ckpt_id += 1
        self._push_action(at_us, ("ckpt", ckpt_id))
        return ckpt_id

    def schedule_fcm(self, at_us: int, worker: OperatorId, fcm: Fcm) -> None:
        self._push_action(at_us, ("fcm", worker, fcm))

    def schedule_source_param(self, at_us: int, worker: OperatorId,
                              **params: Any) -> None:
        self._push_action(at_us, ("param", worker, params))

    def schedule_stop(self, at_us: int) -> None:
        self._push_action(at_us, ("stop",))

    # ------------------------------------------------------------------- run

    def run(self) -> RunResult:
        if self._ran:
            raise EngineError("engine instances are single-run")
        self._ran = True
        stop_reason = "idle"
        while True:
            candidates = self._candidates()
            if not candidates:
                self._check_clean_stop()
                break
            t = min(c[0] for c in candidates)
            if self.config.max_vtime_us is not None and t > self.config.max_vtime_us:
                stop_reason = "max_vtime"
                break
            batch = [c for c in candidates if c[0] == t]
            _, action = batch[0] if len(batch) == 1 else self._rng.choice(batch)
            self._now = t
            if not self._execute(t, action):
                stop_reason = "stopped"
                break
            if (self.config.sink_limit is not None
                    and len(self._sink_records) >= self.config.sink_limit):
                stop_reason = "sink_limit"
                break
            if (self.config.stop_after_reconfig and self.reports
                    and not self._schedule and all(
                        r.status != "pending" for r in self.reports)):
                stop_reason = "reconfig_done"
                break
        return self._result(stop_reason)

    def _candidates(self) -> list[tuple[int, tuple]]:
        out: list[tuple[int, tuple]] = []
        if self._schedule:
            out.append((self._schedule[0][0], ("sched",)))
        for w in self._worker_order:
            busy = self._busy[w]
            inbox = self._inbox[w]
            t_ctl = None
            if inbox:
                t_ctl = max(busy, inbox[0][0])
                out.append((t_ctl, ("ctl", w)))
            core = self._workers[w]
            if w in self._drivers:
                driver = self._drivers[w]
                if not driver.exhausted and not self._backpressured(w):
                    t = max(busy, driver.next_at)
                    if t_ctl is None or t < t_ctl:
                        out.append((t, ("emit", w)))
            for src in core.wiring.inputs:
                ch = self._channels[(src, w)]
                if not ch.items or core.is_blocked(src):
                    continue
                msg = ch.items[0][1]
                if isinstance(msg, TupleMsg) and self._backpressured(w):
                    continue
                t = max(busy, ch.head_time())
                if t_ctl is None or t < t_ctl:
                    out.append((t, ("data", w, src)))
        return out

    def _backpressured(self, w: OperatorId) -> bool:
        cap = self.config.channel_capacity
        for dst in self._workers[w].wiring.out_neighbors:
            if len(self._channels[(w, dst)]) >= cap:
                return True
        return False

    def _execute(self, t: int, action: tuple) -> bool:
        kind = action[0]
        if kind == "sched":
            _, _, act = heapq.heappop(self._schedule)
            return self._run_controller_action(t, act)
        if kind == "ctl":
            w = action[1]
            _, _, fcm = heapq.heappop(self._inbox[w])
            eff = self._workers[w].handle_control(t, fcm)
            self._apply_effects(t, w, eff)
            return True
        if kind == "emit":
            w = action[1]
            eff = self._workers[w].emit_source(t)
            self._drivers[w].advance(t)
            self._busy[w] = t + eff.cost_us
            self._apply_effects(t, w, eff)
            return True
        if kind == "data":
            _, w, src = action
            msg = self._channels[(src, w)].pop()
            core = self._workers[w]
            if isinstance(msg, TupleMsg):
                self._inflight[msg.version_tag] -= 1
                eff = core.handle_tuple(t, msg)
                self._busy[w] = t + eff.cost_us
            else:
                eff = core.handle_marker(t, src, msg)
            self._apply_effects(t, w, eff)
            return True
        raise EngineError(f"unknown action {action!r}")

    def _apply_effects(self, t: int, worker: OperatorId, eff: Effects) -> None:
        for push in eff.pushes:
            key = (worker, push.dst)
            if key not in self._channels:
                raise EngineError(f"no channel {worker} -> {push.dst}")
            self._channels[key].push(push.available_at, push.msg)
            if isinstance(push.msg, TupleMsg):
                self._inflight[push.msg.version_tag] += 1
        self._crossings.extend(eff.crossings)
        self._sink_records.extend(eff.sink_records)
        if eff.processed_tuple:
            self._tuples += 1
        for ack in eff.acks:
            self._fcm_acks.append(ack)
            self._send_all(t, self.ctl.on_ack(t, ack))
        self._send_all(t, self.ctl.maybe_drain(t))

    # ------------------------------------------------------------ controller

    def _run_controller_action(self, t: int, act: tuple) -> bool:
        kind = act[0]
        if kind == "reconfig":
            _, request_id, plan = act
            self._send_all(t, self.ctl.submit(t, request_id, plan))
        elif kind == "epoch":
            self._send_all(t, self.ctl.request_epoch(t, act[1]))
        elif kind == "ckpt":
            self._send_all(t, self.ctl.request_checkpoint(t, act[1]))
        elif kind == "fcm":
            _, w, fcm = act
            if w not in self._workers:
                self._fcm_acks.append(
                    Ack(w, "delivery_failed", t, error="no such worker"))
            else:
                self._deliver_fcm(t, w, fcm)
        elif kind == "param":
            _, w, params = act
            pacing = {k: v for k, v in params.items()
                      if k in ("interval_us", "limit")}
            rest = {k: v for k, v in params.items() if k not in pacing}
            if pacing and w in self._drivers:
                driver = self._drivers[w]
                if "interval_us" in pacing:
                    driver.schedule = SourceSchedule(
                        interval_us=pacing["interval_us"],
                        limit=driver.schedule.limit,
                        start_us=driver.schedule.start_us,
                    )
                    driver.next_at = max(driver.next_at, t)
                if "limit" in pacing:
                    driver.schedule.limit = pacing["limit"]
            if rest:
                self._deliver_fcm(t, w, Fcm("set_param", params=rest))
        elif kind == "stop":
            return False
        else:
            raise EngineError(f"unknown controller action {act!r}")
        return True

    @staticmethod
    def _stamp(marker: EpochMarker, request_id: int) -> EpochMarker:
        # plans are reusable templates; give the marker a per-request identity
        return replace(marker, marker_id=f"{marker.marker_id}#r{request_id}",
                       request_id=request_id)

    def _deliver_fcm(self, t: int, worker: OperatorId, fcm: Fcm) -> None:
        delay = self.config.fcm_base_us
        if self.config.fcm_jitter_us:
            delay += self._rng.randint(0, self.config.fcm_jitter_us)
        heapq.heappush(self._inbox[worker], (t + delay, self._inbox_ord, fcm))
        self._inbox_ord += 1

    def _send_all(self, t: int, sends: list[Send]) -> None:
        for worker, fcm in sends:
            self._deliver_fcm(t, worker, fcm)

    # --------------------------------------------------------------- results

    def _check_clean_stop(self) -> None:
        stuck = []
        for (a, b), ch in self._channels.items():
            if ch.items:
                stuck.append(f"channel {a}->{b} holds {len(ch.items)} messages")
        for w, core in self._workers.items():
            if core.pending_alignment():
                stuck.append(f"{w} awaits marker alignment")
        req = self.ctl.active_request
        if req is not None and req.open:
            stuck.append(f"request {req.id} stuck in phase {req.phase}")
        if stuck:
            raise EngineError("deadlock: " + "; ".join(stuck))

    def _result(self, stop_reason: str) -> RunResult:
        self.log.validate()
        return RunResult(
            log=self.log,
            sink_records=list(self._sink_records),
            reconfig_reports=list(self.reports),
            checkpoints=list(self.checkpoints),
            epochs=list(self.epochs),
            marker_crossings=list(self._crossings),
            fcm_acks=list(self._fcm_acks),
            stop_reason=stop_reason,
            final_vtime=self._now,
            tuples_processed=self._tuples,
        )

    @property
    def reports(self):
        return self.ctl.reports

    @property
    def checkpoints(self):
        return self.ctl.checkpoints

    @property
    def epochs(self):
        return self.ctl.epochs

    @property
    def final_configs(self) -> dict[OperatorId, str]:
        return {w: core.fn.config_id for w, core in self._workers.items()}

    @property
    def dual_state_workers(self) -> list[OperatorId]:
        return [w for w, core in self._workers.items() if core.dual_active]

    # --------------------------------------------------------------- restore

    @classmethod
    def restore(
        cls,
        graph: DataflowGraph,
        functions: Mapping[OperatorId, OperatorFunction] | None,
        checkpoint: CheckpointRecord,
        *,
        config: RunConfig | None = None,
        sources: Mapping[OperatorId, SourceSchedule] | None = None,
    ) -> "DeterministicEngine":
        if checkpoint.status != "complete":
            raise EngineError(
                f"cannot restore from a {checkpoint.status} checkpoint")
        engine = cls(graph, functions, config=config, sources=sources)
        missing = set(engine._workers) - set(checkpoint.parts)
        if missing:
            raise EngineError(f"checkpoint lacks parts for {sorted(missing)}")
        for w, part in checkpoint.parts.items():
            if w not in engine._workers:
                raise EngineError(f"checkpoint part for unknown worker {w}")
            engine._workers[w].restore_part(part)
            if part.source_seq is not None and w in engine._drivers:
                engine._drivers[w].emitted = part.source_seq
        return engine
