"""Small record types produced while a run executes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..graph.model import OperatorId
from .functions import FunctionSpec, OperatorFunction
from .log import ScheduleLog
from .messages import Message


@dataclass
class Push:
    """A message bound for a channel, visible to the consumer at ``available_at``."""

    dst: OperatorId
    msg: Message
    available_at: int


@dataclass
class Ack:
    """Worker-to-controller acknowledgement."""

    worker: OperatorId
    kind: str
    vtime: int
    request_id: int | None = None
    checkpoint_id: int | None = None
    marker_id: str | None = None
    part: "SnapshotPart | None" = None
    error: str | None = None


@dataclass
class SnapshotPart:
    worker: OperatorId
    operator: OperatorId
    state: Any
    config_id: str
    spec: FunctionSpec | None
    function: OperatorFunction | None
    source_seq: int | None = None
    version: int = 1


@dataclass(frozen=True)
class MarkerCrossing:
    """Where in a worker's event sequence a marker took effect."""

    worker: OperatorId
    marker_id: str
    kind: str
    seq: int
    vtime: int


@dataclass(frozen=True)
class SinkRecord:
    worker: OperatorId
    operator: OperatorId
    txn_id: str
    uid: str
    payload: Mapping[str, Any]
    vtime: int
    source_vtime: int
    version_tag: int


@dataclass
class ReconfigReport:
    request_id: int
    scheduler: str
    submitted_vtime: int
    status: str = "pending"  # pending|applied|aborted|rejected
    completed_vtime: int | None = None
    mu_vtimes: dict[OperatorId, int] = field(default_factory=dict)
    reason: str | None = None
    # worker -> (config before, config after); bump version for multi-version
    config_switch: dict[OperatorId, tuple[str, str]] = field(default_factory=dict)
    version: int | None = None

    @property
    def delay_us(self) -> int | None:
        if self.completed_vtime is None:
            return None
        return self.completed_vtime - self.submitted_vtime


@dataclass
class CheckpointRecord:
    checkpoint_id: int
    requested_vtime: int
    status: str = "pending"  # pending|complete|cancelled|deferred
    completed_vtime: int | None = None
    parts: dict[OperatorId, SnapshotPart] = field(default_factory=dict)


@dataclass
class EpochReport:
    marker_id: str
    requested_vtime: int
    completed_vtime: int | None = None


@dataclass
class RunResult:
    log: ScheduleLog
    sink_records: list[SinkRecord]
    reconfig_reports: list[ReconfigReport]
    checkpoints: list[CheckpointRecord]
    epochs: list[EpochReport]
    marker_crossings: list[MarkerCrossing]
    fcm_acks: list[Ack]
    stop_reason: str
    final_vtime: int
    tuples_processed: int

    def report_for(self, request_id: int) -> ReconfigReport:
        for rep in self.reconfig_reports:
            if rep.request_id == request_id:
                return rep
        raise KeyError(request_id)
