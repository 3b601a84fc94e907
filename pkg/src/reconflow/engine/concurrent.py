"""Threaded wall-clock execution.

Every worker is a thread; bounded queues are the channels and give
backpressure for free.  FCMs bypass the data queue through a per-worker
control deque that the loop drains before touching data, so control is
handled between tuples, never mid-apply.  Each worker appends to a private
log segment; segments are merged by timestamp after the run.  Times are
wall-clock microseconds since start.
"""

from __future__ import annotations

import queue
import threading
import time
from collections import Counter, deque
from typing import Any, Mapping

from ..graph.model import DataflowGraph, OperatorId
from .controller import ControllerCore, Send
from .errors import EngineError
from .log import ScheduleLog
from .messages import Fcm, TupleMsg
from .plan import ReconfigPlan
from .records import Ack, RunResult
from .runtime import RunConfig, SourceSchedule, _SourceDriver
from .worker import Effects, WorkerCore, Wiring

_STOP = object()


class ThreadedEngine:
    """Same observable contract as DeterministicEngine, minus replayability."""

    def __init__(
        self,
        graph: DataflowGraph,
        functions: Mapping[OperatorId, Any] | None = None,
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
        functions = dict(functions or {})
        source_schedules = dict(sources or {})

        self._cores: dict[OperatorId, WorkerCore] = {}
        self._segments: dict[OperatorId, ScheduleLog] = {}
        self._inboxes: dict[OperatorId, queue.Queue] = {}
        self._ctl: dict[OperatorId, deque] = {}
        self._drivers: dict[OperatorId, _SourceDriver] = {}
        self._processing: dict[OperatorId, bool] = {}

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
            seg = ScheduleLog()
            fn = functions.get(op, functions.get(logical))
            self._segments[op] = seg
            self._cores[op] = WorkerCore(op, meta, wiring, fn, seg)
            self._inboxes[op] = queue.Queue(maxsize=self.config.channel_capacity)
            self._ctl[op] = deque()
            self._processing[op] = False
            if meta.is_source:
                sched = source_schedules.get(op, source_schedules.get(logical))
                default_cost = max(1, int(meta.cost_ms * 1000))
                self._drivers[op] = _SourceDriver(sched or SourceSchedule(),
                                                  default_cost)

        self._sources = [w for w in sorted(self._cores)
                         if graph.meta(w).is_source]
        self._sinks = [w for w in sorted(self._cores) if graph.meta(w).is_sink]

        self._lock = threading.Lock()  # inflight counter + shared result lists
        self._inflight: Counter = Counter()
        self._sink_records: list = []
        self._crossings: list = []
        self._fcm_acks: list[Ack] = []
        self._tuples = 0
        self._errors: list[BaseException] = []
        self._ack_q: queue.SimpleQueue = queue.SimpleQueue()
        self._stopping = threading.Event()

        # (at_us, kind, payload) actions for the controller thread
        self._agenda: list[tuple[int, tuple]] = []
        self._delivery: list[tuple[int, OperatorId, Fcm]] = []
        self._next_request_id = 1
        self._next_ckpt_id = 1
        self._next_epoch = 1
        import random
        self._rng = random.Random(self.config.seed)
        self.ctl = ControllerCore(
            source_workers=self._sources,
            sink_workers=self._sinks,
            worker_count=len(self._cores),
            config_lookup=lambda w: self._cores[w].fn.config_id,
            checkpoint_policy=self.config.checkpoint_policy,
            inflight_below=self._inflight_below,
            stamp=self._stamp,
        )
        self._t0 = None
        self._ran = False

    # ------------------------------------------------------------- schedule

    def schedule_reconfiguration(self, at_us: int, plan: ReconfigPlan) -> int:
        request_id = self._next_request_id
        self._next_request_id += 1
        self._agenda.append((at_us, ("reconfig", request_id, plan)))
        return request_id

    def schedule_epoch(self, at_us: int) -> str:
        marker_id = f"epoch-{self._next_epoch}"
        self._next_epoch += 1
        self._agenda.append((at_us, ("epoch", marker_id)))
        return marker_id

    def schedule_checkpoint(self, at_us: int) -> int:
        ckpt_id = self._next_ckpt_id
        self._next_ckpt_id += 1
        self._agenda.append((at_us, ("ckpt", ckpt_id)))
        return ckpt_id

    def schedule_fcm(self, at_us: int, worker: OperatorId, fcm: Fcm) -> None:
        self._agenda.append((at_us, ("fcm", worker, fcm)))

    def schedule_stop(self, at_us: int) -> None:
        self._agenda.append((at_us, ("stop",)))

    @staticmethod
    def _stamp(marker, request_id):
        from dataclasses import replace
        return replace(marker, marker_id=f"{marker.marker_id}#r{request_id}",
                       request_id=request_id)

    # ------------------------------------------------------------------ run

    def now_us(self) -> int:
        return int((time.monotonic() - self._t0) * 1_000_000)

    def run(self) -> RunResult:
        if self._ran:
            raise EngineError("engine instances are single-run")
        self._ran = True
        self._t0 = time.monotonic()
        self._agenda.sort(key=lambda a: a[0])
        threads = [threading.Thread(target=self._worker_main, args=(w,),
                                    name=f"worker-{w}", daemon=True)
                   for w in self._cores]
        for th in threads:
            th.start()
        stop_reason = self._controller_main()
        self._stopping.set()
        for w, q in self._inboxes.items():
            try:
                q.put_nowait(_STOP)
            except queue.Full:
                pass  # the worker exits via the stopping flag
        for th in threads:
            th.join(timeout=10)
        if self._errors:
            raise self._errors[0]
        return self._result(stop_reason)

    # ----------------------------------------------------------- controller

    def _controller_main(self) -> str:
        agenda = deque(self._agenda)
        idle_since = None
        while True:
            now = self.now_us()
            if self.config.max_vtime_us is not None and now > self.config.max_vtime_us:
                return "max_vtime"
            if self._errors:
                return "error"
            while agenda and agenda[0][0] <= now:
                _, act = agenda.popleft()
                if act[0] == "stop":
                    return "stopped"
                self._controller_action(now, act)
            while self._delivery and self._delivery[0][0] <= now:
                self._delivery.sort(key=lambda d: d[0])
                if self._delivery[0][0] > now:
                    break
                _, w, fcm = self._delivery.pop(0)
                self._ctl[w].append(fcm)
            try:
                while True:
                    ack = self._ack_q.get_nowait()
                    self._fcm_acks.append(ack)
                    self._send_all(now, self.ctl.on_ack(now, ack))
            except queue.Empty:
                pass
            self._send_all(now, self.ctl.maybe_drain(now))
            with self._lock:
                if (self.config.sink_limit is not None
                        and len(self._sink_records) >= self.config.sink_limit):
                    return "sink_limit"
            if (self.config.stop_after_reconfig and self.ctl.reports
                    and not agenda and all(
                        r.status != "pending" for r in self.ctl.reports)):
                return "reconfig_done"
            if not agenda and not self._delivery and self._quiescent():
                if idle_since is None:
                    idle_since = time.monotonic()
                elif time.monotonic() - idle_since > 0.01:
                    return "idle"
            else:
                idle_since = None
            time.sleep(0.0002)

    def _quiescent(self) -> bool:
        for w, driver in self._drivers.items():
            if not driver.exhausted:
                return False
        req = self.ctl.active_request
        if req is not None and req.open:
            return False
        with self._lock:
            if sum(self._inflight.values()) != 0:
                return False
        for w in self._cores:
            if (self._processing[w] or self._ctl[w]
                    or not self._inboxes[w].empty()
                    or self._cores[w].pending_alignment()):
                return False
        return True

    def _controller_action(self, now: int, act: tuple) -> None:
        kind = act[0]
        if kind == "reconfig":
            _, request_id, plan = act
            self._send_all(now, self.ctl.submit(now, request_id, plan))
        elif kind == "epoch":
            self._send_all(now, self.ctl.request_epoch(now, act[1]))
        elif kind == "ckpt":
            self._send_all(now, self.ctl.request_checkpoint(now, act[1]))
        elif kind == "fcm":
            _, w, fcm = act
            if w not in self._cores:
                self._fcm_acks.append(
                    Ack(w, "delivery_failed", now, error="no such worker"))
            else:
                self._send_all(now, [(w, fcm)])
        else:
            raise EngineError(f"unknown controller action {act!r}")

    def _send_all(self, now: int, sends: list[Send]) -> None:
        for w, fcm in sends:
            delay = self.config.fcm_base_us
            if self.config.fcm_jitter_us:
                delay += self._rng.randint(0, self.config.fcm_jitter_us)
            self._delivery.append((now + delay, w, fcm))
        if sends:
            self._delivery.sort(key=lambda d: d[0])

    def _inflight_below(self, version: int) -> int:
        with self._lock:
            return sum(n for tag, n in self._inflight.items()
                       if tag < version and n > 0)

    # -------------------------------------------------------------- workers

    def _worker_main(self, w: OperatorId) -> None:
        try:
            if w in self._drivers:
                self._source_loop(w)
            else:
                self._data_loop(w)
        except BaseException as exc:  # surface crashes to run()
            self._errors.append(exc)
            self._stopping.set()

    def _source_loop(self, w: OperatorId) -> None:
        core = self._cores[w]
        driver = self._drivers[w]
        ctl = self._ctl[w]
        while not self._stopping.is_set():
            if ctl:
                self._handle_control(w, core, ctl.popleft())
                continue
            if driver.exhausted:
                time.sleep(0.0002)
                continue
            now = self.now_us()
            if now < driver.next_at:
                time.sleep(min(0.0005, (driver.next_at - now) / 1e6))
                continue
            self._processing[w] = True
            eff = core.emit_source(now)
            driver.advance(now)
            self._sleep_cost(eff)
            self._apply_effects(w, eff)
            self._processing[w] = False

    def _data_loop(self, w: OperatorId) -> None:
        core = self._cores[w]
        inbox = self._inboxes[w]
        ctl = self._ctl[w]
        held: deque = deque()  # messages parked behind a marker alignment
        while True:
            if self._stopping.is_set():
                return
            if ctl:
                self._handle_control(w, core, ctl.popleft())
                self._replay_held(w, core, held)
                continue
            replayed = self._replay_held(w, core, held)
            if replayed:
                continue
            try:
                item = inbox.get(timeout=0.0002)
            except queue.Empty:
                if self._stopping.is_set():
                    return
                continue
            if item is _STOP:
                return
            src, msg = item
            if core.is_blocked(src):
                held.append((src, msg))
                continue
            self._process(w, core, src, msg)

    def _replay_held(self, w, core, held) -> bool:
        progressed = False
        for _ in range(len(held)):
            src, msg = held.popleft()
            if core.is_blocked(src):
                held.append((src, msg))
            else:
                self._process(w, core, src, msg)
                progressed = True
        return progressed

    def _process(self, w: OperatorId, core: WorkerCore, src, msg) -> None:
        self._processing[w] = True
        now = self.now_us()
        if isinstance(msg, TupleMsg):
            with self._lock:
                self._inflight[msg.version_tag] -= 1
                self._tuples += 1
            eff = core.handle_tuple(now, msg)
            self._sleep_cost(eff)
        else:
            eff = core.handle_marker(now, src, msg)
        self._apply_effects(w, eff)
        self._processing[w] = False

    def _handle_control(self, w: OperatorId, core: WorkerCore, fcm: Fcm) -> None:
        self._processing[w] = True
        eff = core.handle_control(self.now_us(), fcm)
        self._apply_effects(w, eff)
        self._processing[w] = False

    def _sleep_cost(self, eff: Effects) -> None:
        if eff.cost_us:
            time.sleep(eff.cost_us / 1_000_000)

    def _apply_effects(self, worker: OperatorId, eff: Effects) -> None:
        for push in eff.pushes:
            if push.dst not in self._inboxes:
                raise EngineError(f"no channel {worker} -> {push.dst}")
            if isinstance(push.msg, TupleMsg):
                with self._lock:
                    self._inflight[push.msg.version_tag] += 1
            # blocks when the receiver is saturated: backpressure
            while True:
                try:
                    self._inboxes[push.dst].put((worker, push.msg),
                                                timeout=0.01)
                    break
                except queue.Full:
                    if self._stopping.is_set():
                        return
        with self._lock:
            self._crossings.extend(eff.crossings)
            self._sink_records.extend(eff.sink_records)
        for ack in eff.acks:
            self._ack_q.put(ack)

    # -------------------------------------------------------------- results

    def _result(self, stop_reason: str) -> RunResult:
        log = ScheduleLog()
        # k-way merge by head vtime; segment order within a worker is the
        # schedule order and must survive (buffered multi-version events
        # carry earlier stamps than their log position)
        segs = {w: seg.worker_events(w) for w, seg in self._segments.items()}
        ptr = {w: 0 for w in segs}
        events = []
        while True:
            heads = [(evs[ptr[w]].vtime, w) for w, evs in segs.items()
                     if ptr[w] < len(evs)]
            if not heads:
                break
            _, w = min(heads)
            events.append(segs[w][ptr[w]])
            ptr[w] += 1
        for ev in events:
            if ev.kind == "phi":
                log.append_phi(ev.worker, ev.operator, ev.vtime, ev.txn_id,
                               ev.uid, ev.parent_uid, ev.version_tag,
                               ev.config_id)
            else:
                log.append_mu(ev.worker, ev.operator, ev.vtime,
                              ev.request_id, ev.config_id)
        log.validate()
        return RunResult(
            log=log,
            sink_records=list(self._sink_records),
            reconfig_reports=list(self.ctl.reports),
            checkpoints=list(self.ctl.checkpoints),
            epochs=list(self.ctl.epochs),
            marker_crossings=list(self._crossings),
            fcm_acks=list(self._fcm_acks),
            stop_reason=stop_reason,
            final_vtime=self.now_us(),
            tuples_processed=self._tuples,
        )

    @property
    def final_configs(self) -> dict[OperatorId, str]:
        return {w: core.fn.config_id for w, core in self._cores.items()}
