"""Dataflow execution: deterministic virtual-time mode and threaded mode."""

from .errors import EngineError
from .functions import (FunctionSpec, OperatorFunction, ResolvedUpdate,
                        reset_state)
from .log import MuEvent, PhiEvent, ScheduleLog, event_from_dict, event_to_dict
from .messages import CheckpointMarker, EpochMarker, Fcm, TupleMsg
from .plan import ReconfigPlan
from .records import (Ack, CheckpointRecord, EpochReport, MarkerCrossing,
                      ReconfigReport, RunResult, SinkRecord, SnapshotPart)
from .concurrent import ThreadedEngine
from .runtime import DeterministicEngine, RunConfig, SourceSchedule

__all__ = [
    "Ack",
    "CheckpointMarker",
    "CheckpointRecord",
    "DeterministicEngine",
    "EngineError",
    "EpochMarker",
    "EpochReport",
    "Fcm",
    "FunctionSpec",
    "MarkerCrossing",
    "MuEvent",
    "OperatorFunction",
    "PhiEvent",
    "ReconfigPlan",
    "ReconfigReport",
    "ResolvedUpdate",
    "RunConfig",
    "RunResult",
    "ScheduleLog",
    "SinkRecord",
    "SnapshotPart",
    "SourceSchedule",
    "ThreadedEngine",
    "TupleMsg",
    "event_from_dict",
    "event_to_dict",
    "reset_state",
]
