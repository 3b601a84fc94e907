"""Per-worker state machine, shared by both execution modes.

A worker owns one operator instance: its function, its state, its marker
alignment bookkeeping and, during a multi-version switch, a second
configuration running next to the first.  The runtime feeds it messages
and applies the effects it returns; the core never touches channels or
clocks itself, which is what lets the virtual-time and the threaded
runtimes drive identical logic.
"""

from __future__ import annotations

import copy
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

from ..graph.model import Arity, OperatorId, OperatorMeta
from .errors import EngineError
from .functions import OperatorFunction, ResolvedUpdate
from .log import ScheduleLog
from .messages import CheckpointMarker, EpochMarker, Fcm, TupleMsg
from .records import Ack, MarkerCrossing, Push, SinkRecord, SnapshotPart

AlignKey = tuple[str, object]


@dataclass
class Wiring:
    """Channel-level neighbourhood of one worker."""

    inputs: tuple[OperatorId, ...]
    out_neighbors: tuple[OperatorId, ...]
    # downstream logical operator -> its workers, in worker index order
    routes: dict[OperatorId, tuple[OperatorId, ...]]


@dataclass
class Effects:
    cost_us: int = 0
    pushes: list[Push] = field(default_factory=list)
    acks: list[Ack] = field(default_factory=list)
    crossings: list[MarkerCrossing] = field(default_factory=list)
    sink_records: list[SinkRecord] = field(default_factory=list)
    processed_tuple: bool = False


def _passthrough(state, payload):
    return state, [(payload, None)]


def _swallow(state, payload):
    return state, []


PASSTHROUGH = OperatorFunction(_passthrough, config_id="passthrough")
SWALLOW = OperatorFunction(_swallow, config_id="swallow")


class WorkerCore:
    def __init__(
        self,
        worker_id: OperatorId,
        meta: OperatorMeta,
        wiring: Wiring,
        function: OperatorFunction | None,
        log: ScheduleLog,
    ) -> None:
        self.id = worker_id
        self.meta = meta
        self.operator = meta.logical(worker_id)
        self.wiring = wiring
        self.log = log
        self.fn = function or (SWALLOW if not wiring.out_neighbors else PASSTHROUGH)
        self.state = self.fn.make_state()
        self.version = 1
        # multi-version slot: populated between install and retire
        self.new_fn: OperatorFunction | None = None
        self.new_state: Any = None
        self.new_version: int | None = None
        self._phi_buffer: list[tuple] = []
        # marker alignment
        self._arrived: dict[AlignKey, set[OperatorId]] = {}
        self._pending_marker: dict[AlignKey, EpochMarker | CheckpointMarker] = {}
        self._blocked: dict[OperatorId, AlignKey] = {}
        # outputs already produced per transaction, tracked only when the
        # operator declares at most one output per transaction
        self._txn_outputs: dict[str, int] = {} if meta.uniqueness else None
        self.source_seq = 0

    # ------------------------------------------------------------------ data

    def is_blocked(self, src: OperatorId) -> bool:
        return src in self._blocked

    @property
    def is_sink(self) -> bool:
        return not self.wiring.out_neighbors

    def handle_tuple(self, now: int, msg: TupleMsg) -> Effects:
        eff = Effects(processed_tuple=True)
        cost = int(self.meta.cost_ms * 1000)
        done = now + cost
        eff.cost_us = cost

        if self.meta.synthetic_replicate:
            self._log_phi(done, msg, "replicate", live=True)
            for k, dst in enumerate(self.wiring.out_neighbors):
                eff.pushes.append(Push(dst, self._child(msg, k, msg.payload), done))
            return eff

        fn, dual_new = self._dispatch(msg.version_tag)
        state = self.new_state if dual_new else self.state
        state, emissions = fn.apply(state, dict(msg.payload))
        if dual_new:
            self.new_state = state
        else:
            self.state = state

        if self.meta.arity is Arity.ONE_TO_ONE and len(emissions) > 1:
            raise EngineError(
                f"{self.operator} declared one_to_one but emitted "
                f"{len(emissions)} tuples for {msg.uid}"
            )
        if self._txn_outputs is not None and emissions:
            seen = self._txn_outputs.get(msg.txn_id, 0) + len(emissions)
            if seen > 1:
                raise EngineError(
                    f"{self.operator} declared at most one output per "
                    f"transaction but produced {seen} for {msg.txn_id}"
                )
            self._txn_outputs[msg.txn_id] = seen

        # new-configuration events stay buffered until the old one retires
        self._log_phi(done, msg, fn.config_id, live=not dual_new)

        for k, (payload, target) in enumerate(emissions):
            dst = self._route(target, payload, msg.txn_id)
            eff.pushes.append(Push(dst, self._child(msg, k, payload), done))
        if self.is_sink:
            eff.sink_records.append(
                SinkRecord(
                    worker=self.id,
                    operator=self.operator,
                    txn_id=msg.txn_id,
                    uid=msg.uid,
                    payload=msg.payload,
                    vtime=done,
                    source_vtime=msg.source_vtime,
                    version_tag=msg.version_tag,
                )
            )
        return eff

    @property
    def dual_active(self) -> bool:
        return self.new_version is not None

    def _dispatch(self, version_tag: int) -> tuple[OperatorFunction, bool]:
        if self.dual_active and version_tag >= self.new_version:
            return (self.new_fn or self.fn), True
        return self.fn, False

    def _log_phi(self, vtime: int, msg: TupleMsg, config_id: str, live: bool) -> None:
        args = (self.id, self.operator, vtime, msg.txn_id, msg.uid,
                msg.parent_uid, msg.version_tag, config_id)
        if live:
            self.log.append_phi(*args)
        else:
            self._phi_buffer.append(args)

    def _child(self, msg: TupleMsg, k: int, payload: dict) -> TupleMsg:
        return TupleMsg(
            txn_id=msg.txn_id,
            uid=f"{msg.uid}.{k}",
            payload=payload,
            parent_uid=msg.uid,
            version_tag=msg.version_tag,
            source_vtime=msg.source_vtime,
        )

    def _route(self, target: OperatorId | None, payload: dict, txn_id: str) -> OperatorId:
        routes = self.wiring.routes
        if target is None:
            if len(routes) != 1:
                raise EngineError(
                    f"{self.id} emitted an unaddressed tuple but has "
                    f"{len(routes)} downstream operators"
                )
            target = next(iter(routes))
        try:
            dsts = routes[target]
        except KeyError:
            raise EngineError(f"{self.id} emitted toward {target}, not a downstream operator")
        if len(dsts) == 1:
            return dsts[0]
        key = str(payload.get("key", txn_id))
        return dsts[zlib.crc32(key.encode()) % len(dsts)]

    # --------------------------------------------------------------- markers

    def handle_marker(self, now: int, src: OperatorId, marker) -> Effects:
        if isinstance(marker, CheckpointMarker):
            key: AlignKey = ("ckpt", marker.checkpoint_id)
            expected = set(self.wiring.inputs)
        else:
            key = ("epoch", marker.marker_id)
            if marker.scoped:
                expected = {
                    s for s in self.wiring.inputs if (s, self.id) in marker.scope_edges
                }
            else:
                expected = set(self.wiring.inputs)
        if src not in expected:
            raise EngineError(f"marker {key} arrived at {self.id} on unexpected channel {src}")
        arrived = self._arrived.setdefault(key, set())
        arrived.add(src)
        self._pending_marker[key] = marker
        self._blocked[src] = key
        if arrived != expected:
            return Effects()
        del self._arrived[key]
        del self._pending_marker[key]
        for ch in [c for c, k in self._blocked.items() if k == key]:
            del self._blocked[ch]
        return self._complete_marker(now, marker, key)

    def _complete_marker(self, now: int, marker, key: AlignKey) -> Effects:
        eff = Effects()
        eff.crossings.append(
            MarkerCrossing(
                worker=self.id,
                marker_id=str(key[1]),
                kind=key[0],
                seq=self.log.next_seq(self.id),
                vtime=now,
            )
        )
        if isinstance(marker, CheckpointMarker):
            eff.acks.append(
                Ack(self.id, "snapshot", now,
                    checkpoint_id=marker.checkpoint_id, part=self.snapshot_part())
            )
            for dst in self.wiring.out_neighbors:
                eff.pushes.append(Push(dst, marker, now))
            return eff
        update = marker.updates.get(self.id)
        if update is not None:
            eff.acks.append(self._apply_update(now, update, marker.request_id))
        if marker.scoped:
            outs = [d for d in self.wiring.out_neighbors if (self.id, d) in marker.scope_edges]
        else:
            outs = list(self.wiring.out_neighbors)
        for dst in outs:
            eff.pushes.append(Push(dst, marker, now))
        if self.is_sink and not marker.scoped:
            eff.acks.append(Ack(self.id, "epoch_done", now,
                                request_id=marker.request_id, marker_id=marker.marker_id))
        return eff

    # --------------------------------------------------------------- control

    def handle_control(self, now: int, fcm: Fcm) -> Effects:
        eff = Effects()
        kind = fcm.kind
        if kind == "apply":
            if fcm.update is not None:
                eff.acks.append(self._apply_update(now, fcm.update, fcm.request_id))
            if fcm.marker is not None:
                marker = fcm.marker
                outs = self.wiring.out_neighbors
                if marker.scoped:
                    outs = [d for d in outs if (self.id, d) in marker.scope_edges]
                for dst in outs:
                    eff.pushes.append(Push(dst, marker, now))
        elif kind == "install":
            try:
                carried = fcm.update.carry_state(self.state)
            except Exception as exc:  # surfaced as an aborted request
                eff.acks.append(Ack(self.id, "install_failed", now,
                                    request_id=fcm.request_id, error=str(exc)))
                return eff
            self.new_fn = fcm.update.function or self.fn
            self.new_state = carried
            self.new_version = fcm.version
            eff.acks.append(Ack(self.id, "installed", now, request_id=fcm.request_id))
        elif kind == "retire":
            if not self.dual_active:
                raise EngineError(f"retire at {self.id} without an installed configuration")
            self.fn = self.new_fn or self.fn
            self.state = self.new_state
            self.version = self.new_version
            self.new_fn = None
            self.new_state = None
            self.new_version = None
            self.log.append_mu(self.id, self.operator, now,
                               fcm.request_id if fcm.request_id is not None else -1,
                               self.fn.config_id)
            for args in self._phi_buffer:
                self.log.append_phi(*args)
            self._phi_buffer.clear()
            eff.acks.append(Ack(self.id, "retired", now, request_id=fcm.request_id))
        elif kind == "uninstall":
            self.new_fn = None
            self.new_state = None
            self.new_version = None
            self._phi_buffer.clear()
            eff.acks.append(Ack(self.id, "uninstalled", now, request_id=fcm.request_id))
        elif kind == "bump_version":
            self.version = fcm.version
            eff.acks.append(Ack(self.id, "bumped", now, request_id=fcm.request_id))
        elif kind == "inject_epoch":
            marker = fcm.marker
            eff.crossings.append(
                MarkerCrossing(self.id, marker.marker_id, "epoch",
                               self.log.next_seq(self.id), now)
            )
            update = marker.updates.get(self.id)
            if update is not None:
                eff.acks.append(self._apply_update(now, update, marker.request_id))
            for dst in self.wiring.out_neighbors:
                eff.pushes.append(Push(dst, marker, now))
            eff.acks.append(Ack(self.id, "injected", now,
                                request_id=fcm.request_id, marker_id=marker.marker_id))
        elif kind == "inject_checkpoint":
            marker = CheckpointMarker(fcm.checkpoint_id)
            eff.crossings.append(
                MarkerCrossing(self.id, str(fcm.checkpoint_id), "ckpt",
                               self.log.next_seq(self.id), now)
            )
            eff.acks.append(Ack(self.id, "snapshot", now,
                                checkpoint_id=fcm.checkpoint_id, part=self.snapshot_part()))
            for dst in self.wiring.out_neighbors:
                eff.pushes.append(Push(dst, marker, now))
        elif kind == "set_param":
            if isinstance(self.state, dict) and fcm.params:
                self.state.update(fcm.params)
            eff.acks.append(Ack(self.id, "param_set", now, request_id=fcm.request_id))
        else:
            raise EngineError(f"unknown control kind {kind!r} at {self.id}")
        return eff

    def _apply_update(self, now: int, update: ResolvedUpdate, request_id: int | None) -> Ack:
        try:
            carried = update.carry_state(self.state)
        except Exception as exc:
            return Ack(self.id, "apply_failed", now,
                       request_id=request_id, error=str(exc))
        self.state = carried
        if update.function is not None:
            self.fn = update.function
        self.version += 1
        self.log.append_mu(self.id, self.operator, now,
                           request_id if request_id is not None else -1,
                           self.fn.config_id)
        return Ack(self.id, "applied", now, request_id=request_id)

    # --------------------------------------------------------------- sources

    def emit_source(self, now: int) -> Effects:
        eff = Effects()
        seq = self.source_seq
        self.source_seq += 1
        self.state, emissions = self.fn.apply(self.state, {"seq": seq})
        cost = int(self.meta.cost_ms * 1000)
        eff.cost_us = cost
        done = now + cost
        for k, (payload, target) in enumerate(emissions):
            txn = f"{self.id}#{seq}" if len(emissions) == 1 else f"{self.id}#{seq}.{k}"
            msg = TupleMsg(txn_id=txn, uid=txn, payload=payload,
                           version_tag=self.version, source_vtime=done)
            dst = self._route(target, payload, txn)
            eff.pushes.append(Push(dst, msg, done))
        return eff

    # ------------------------------------------------------------- snapshots

    def snapshot_part(self) -> SnapshotPart:
        return SnapshotPart(
            worker=self.id,
            operator=self.operator,
            state=copy.deepcopy(self.state),
            config_id=self.fn.config_id,
            spec=self.fn.spec,
            function=self.fn,
            source_seq=self.source_seq if self.meta.is_source else None,
            version=self.version,
        )

    def restore_part(self, part: SnapshotPart) -> None:
        self.state = copy.deepcopy(part.state)
        if part.function is not None:
            self.fn = part.function
        self.version = part.version
        if part.source_seq is not None:
            self.source_seq = part.source_seq

    def pending_alignment(self) -> bool:
        return bool(self._arrived)
