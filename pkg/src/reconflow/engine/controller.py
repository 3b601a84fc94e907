"""Controller actor: reconfiguration, epoch and checkpoint lifecycles.

The controller never touches channels or clocks.  Every entry point takes
the current time and returns the FCMs to send, so the same state machine
serves the virtual-time loop and the threaded runtime (which calls it from
its controller thread only).
"""

from __future__ import annotations

from typing import Callable, Iterable

from ..graph.model import OperatorId
from .errors import EngineError
from .messages import EpochMarker, Fcm
from .plan import ReconfigPlan
from .records import Ack, CheckpointRecord, EpochReport, ReconfigReport

Send = tuple[OperatorId, Fcm]


class _Request:
    def __init__(self, request_id: int, plan: ReconfigPlan, now: int,
                 report: ReconfigReport) -> None:
        self.id = request_id
        self.plan = plan
        self.report = report
        self.submitted = now
        self.pending_delivery: set[OperatorId] = set(plan.fcm_targets)
        self.pending_apply: set[OperatorId] = set(plan.updates)
        self.pending_install: set[OperatorId] = set()
        self.pending_bump: set[OperatorId] = set()
        self.pending_retire: set[OperatorId] = set()
        self.phase = "dispatch"
        self.version: int | None = None

    @property
    def open(self) -> bool:
        return self.report.status == "pending"


class ControllerCore:
    def __init__(
        self,
        *,
        source_workers: Iterable[OperatorId],
        sink_workers: Iterable[OperatorId],
        worker_count: int,
        config_lookup: Callable[[OperatorId], str],
        checkpoint_policy: str,
        inflight_below: Callable[[int], int],
        stamp: Callable[[EpochMarker, int], EpochMarker],
    ) -> None:
        self._sources = list(source_workers)
        self._sinks = list(sink_workers)
        self._n_workers = worker_count
        self._config_lookup = config_lookup
        self._policy = checkpoint_policy
        self._inflight_below = inflight_below
        self._stamp = stamp
        self._requests: dict[int, _Request] = {}
        self._active: _Request | None = None
        self._version = 1
        self._deferred_ckpts: list[CheckpointRecord] = []
        self._epoch_waits: dict[str, set[OperatorId]] = {}
        self._ckpt_records: dict[int, CheckpointRecord] = {}
        self.reports: list[ReconfigReport] = []
        self.checkpoints: list[CheckpointRecord] = []
        self.epochs: list[EpochReport] = []

    @property
    def active_request(self) -> _Request | None:
        return self._active

    # ------------------------------------------------------------ lifecycle

    def submit(self, t: int, request_id: int, plan: ReconfigPlan) -> list[Send]:
        report = ReconfigReport(request_id, plan.scheduler, t)
        self.reports.append(report)
        if self._active is not None and self._active.open:
            report.status = "rejected"
            report.reason = "busy: another reconfiguration is in progress"
            return []
        req = _Request(request_id, plan, t, report)
        self._requests[request_id] = req
        self._active = req
        for w, upd in plan.updates.items():
            old = self._config_lookup(w)
            new = upd.function.config_id if upd.function is not None else old
            report.config_switch[w] = (old, new)
        if self._policy == "reconfig_safe":
            for rec in self._ckpt_records.values():
                if rec.status == "pending":
                    rec.status = "cancelled"
        sends: list[Send] = []
        if plan.scheduler == "epoch":
            req.phase = "apply"
            for src in plan.fcm_targets:
                marker = self._stamp(plan.markers[src], request_id)
                sends.append((src, Fcm("inject_epoch", request_id=request_id,
                                       marker=marker)))
        elif plan.scheduler in ("naive", "fries"):
            req.phase = "apply"
            for w in plan.fcm_targets:
                marker = plan.markers.get(w)
                if marker is not None:
                    marker = self._stamp(marker, request_id)
                sends.append((w, Fcm("apply", request_id=request_id,
                                     update=plan.updates.get(w),
                                     marker=marker)))
        elif plan.scheduler == "multiversion":
            self._version += 1
            req.version = self._version
            report.version = req.version
            req.phase = "install"
            req.pending_install = set(plan.fcm_targets)
            for w in plan.fcm_targets:
                sends.append((w, Fcm("install", request_id=request_id,
                                     update=plan.updates[w],
                                     version=req.version)))
        else:  # pragma: no cover - plan validates its kind
            raise EngineError(plan.scheduler)
        return sends

    def request_epoch(self, t: int, marker_id: str) -> list[Send]:
        marker = EpochMarker(marker_id=marker_id)
        self.epochs.append(EpochReport(marker_id, t))
        self._epoch_waits[marker_id] = set(self._sinks)
        return [(src, Fcm("inject_epoch", marker=marker))
                for src in self._sources]

    def request_checkpoint(self, t: int, ckpt_id: int) -> list[Send]:
        rec = CheckpointRecord(ckpt_id, t)
        self.checkpoints.append(rec)
        self._ckpt_records[ckpt_id] = rec
        active = self._active
        if (self._policy == "reconfig_safe" and active is not None
                and active.open and active.pending_delivery):
            rec.status = "deferred"
            self._deferred_ckpts.append(rec)
            return []
        return self._start_checkpoint(t, rec)

    def _start_checkpoint(self, t: int, rec: CheckpointRecord) -> list[Send]:
        rec.status = "pending"
        return [(src, Fcm("inject_checkpoint", checkpoint_id=rec.checkpoint_id))
                for src in self._sources]

    def on_ack(self, t: int, ack: Ack) -> list[Send]:
        sends: list[Send] = []
        req = (self._requests.get(ack.request_id)
               if ack.request_id is not None else None)
        if req is not None and ack.worker in req.pending_delivery:
            req.pending_delivery.discard(ack.worker)
            if not req.pending_delivery:
                sends.extend(self._release_deferred(t))
        kind = ack.kind
        if kind == "applied" and req is not None:
            req.report.mu_vtimes[ack.worker] = t
            req.pending_apply.discard(ack.worker)
            if not req.pending_apply and req.plan.scheduler != "multiversion":
                sends.extend(self._complete(t, req))
        elif kind == "apply_failed" and req is not None:
            sends.extend(self._abort(t, req, ack))
        elif kind == "installed" and req is not None:
            req.pending_install.discard(ack.worker)
            if not req.pending_install and req.phase == "install":
                req.phase = "bump"
                req.pending_bump = set(self._sources)
                for src in self._sources:
                    sends.append((src, Fcm("bump_version", request_id=req.id,
                                           version=req.version)))
        elif kind == "install_failed" and req is not None:
            sends.extend(self._abort(t, req, ack))
        elif kind == "bumped" and req is not None:
            req.pending_bump.discard(ack.worker)
            if not req.pending_bump and req.phase == "bump":
                req.phase = "drain"
        elif kind == "retired" and req is not None:
            req.report.mu_vtimes[ack.worker] = t
            req.pending_retire.discard(ack.worker)
            if not req.pending_retire and req.phase == "retire":
                sends.extend(self._complete(t, req))
        elif kind == "epoch_done":
            marker_id = ack.marker_id
            waits = self._epoch_waits.get(marker_id)
            if waits is not None:
                waits.discard(ack.worker)
                if not waits:
                    del self._epoch_waits[marker_id]
                    for rec in self.epochs:
                        if rec.marker_id == marker_id:
                            rec.completed_vtime = t
        elif kind == "snapshot":
            rec = self._ckpt_records.get(ack.checkpoint_id)
            if rec is not None and rec.status == "pending":
                rec.parts[ack.worker] = ack.part
                if len(rec.parts) == self._n_workers:
                    rec.status = "complete"
                    rec.completed_vtime = t
        return sends

    def maybe_drain(self, t: int) -> list[Send]:
        req = self._active
        if req is None or req.phase != "drain":
            return []
        if self._inflight_below(req.version) != 0:
            return []
        req.phase = "retire"
        req.pending_retire = set(req.plan.updates)
        return [(w, Fcm("retire", request_id=req.id))
                for w in req.plan.updates]

    def _complete(self, t: int, req: _Request) -> list[Send]:
        req.report.status = "applied"
        req.report.completed_vtime = t
        if self._active is req:
            self._active = None
        return self._release_deferred(t)

    def _abort(self, t: int, req: _Request, ack: Ack) -> list[Send]:
        req.report.status = "aborted"
        switched = sorted(req.report.mu_vtimes)
        req.report.reason = (
            f"{ack.worker}: {ack.error}; already switched: {switched or 'none'}")
        sends: list[Send] = []
        if req.plan.scheduler == "multiversion":
            for w in req.plan.fcm_targets:
                if w != ack.worker:
                    sends.append((w, Fcm("uninstall", request_id=req.id)))
        if self._active is req:
            self._active = None
        sends.extend(self._release_deferred(t))
        return sends

    def _release_deferred(self, t: int) -> list[Send]:
        sends: list[Send] = []
        while self._deferred_ckpts:
            rec = self._deferred_ckpts.pop(0)
            if rec.status == "deferred":
                sends.extend(self._start_checkpoint(t, rec))
        return sends
