"""Schedule log: per-worker sequences of processing and switch events.

Every worker appends a processing event (kind ``phi``) when it finishes a
tuple and a switch event (kind ``mu``) when it changes configuration.  The
per-worker sequence number records the worker's own total order; the
global index records the engine-wide append order (deterministic in
virtual-time mode, lock-ordered in concurrent mode).

Line format, one JSON object per event:

    {"worker": ..., "seq": ..., "kind": "phi"|"mu", "operator": ...,
     "vtime": ...,
     phi only: "txn_id", "uid", "parent_uid", "version_tag",
     mu only: "request_id",
     both: "config_id", "global_index"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from ..graph.model import OperatorId


@dataclass(frozen=True)
class PhiEvent:
    worker: OperatorId
    operator: OperatorId
    seq: int
    vtime: int
    txn_id: str
    uid: str
    parent_uid: str | None
    version_tag: int
    config_id: str
    global_index: int

    kind = "phi"


@dataclass(frozen=True)
class MuEvent:
    worker: OperatorId
    operator: OperatorId
    seq: int
    vtime: int
    request_id: int
    config_id: str
    global_index: int

    kind = "mu"


Event = Union[PhiEvent, MuEvent]


class ScheduleLog:
    """Append-only event log with per-worker order and a global order."""

    def __init__(self) -> None:
        self._by_worker: dict[OperatorId, list[Event]] = {}
        self._all: list[Event] = []

    def __len__(self) -> int:
        return len(self._all)

    @property
    def events(self) -> list[Event]:
        return list(self._all)

    @property
    def workers(self) -> list[OperatorId]:
        return sorted(self._by_worker)

    def worker_events(self, worker: OperatorId) -> list[Event]:
        return list(self._by_worker.get(worker, ()))

    def next_seq(self, worker: OperatorId) -> int:
        return len(self._by_worker.get(worker, ()))

    def append(self, event: Event) -> None:
        self._by_worker.setdefault(event.worker, []).append(event)
        self._all.append(event)

    def append_phi(
        self,
        worker: OperatorId,
        operator: OperatorId,
        vtime: int,
        txn_id: str,
        uid: str,
        parent_uid: str | None,
        version_tag: int,
        config_id: str,
    ) -> PhiEvent:
        ev = PhiEvent(
            worker=worker,
            operator=operator,
            seq=self.next_seq(worker),
            vtime=vtime,
            txn_id=txn_id,
            uid=uid,
            parent_uid=parent_uid,
            version_tag=version_tag,
            config_id=config_id,
            global_index=len(self._all),
        )
        self.append(ev)
        return ev

    def append_mu(
        self,
        worker: OperatorId,
        operator: OperatorId,
        vtime: int,
        request_id: int,
        config_id: str,
    ) -> MuEvent:
        ev = MuEvent(
            worker=worker,
            operator=operator,
            seq=self.next_seq(worker),
            vtime=vtime,
            request_id=request_id,
            config_id=config_id,
            global_index=len(self._all),
        )
        self.append(ev)
        return ev

    def phi_events(self) -> Iterator[PhiEvent]:
        return (e for e in self._all if isinstance(e, PhiEvent))

    def mu_events(self) -> Iterator[MuEvent]:
        return (e for e in self._all if isinstance(e, MuEvent))

    def validate(self) -> None:
        """Check per-worker seq contiguity and global index consistency."""
        for worker, events in self._by_worker.items():
            for i, ev in enumerate(events):
                if ev.seq != i:
                    raise ValueError(f"{worker}: seq {ev.seq} at position {i}")
                if ev.worker != worker:
                    raise ValueError(f"{worker}: event labelled {ev.worker}")
            indices = [e.global_index for e in events]
            if indices != sorted(indices):
                raise ValueError(f"{worker}: global order disagrees with seq order")
        all_indices = [e.global_index for e in self._all]
        if all_indices != list(range(len(self._all))):
            raise ValueError("global indices are not contiguous")

    # serialization

    def export_lines(self) -> Iterator[str]:
        for ev in self._all:
            yield json.dumps(event_to_dict(ev), sort_keys=True)

    def export(self) -> str:
        return "".join(line + "\n" for line in self.export_lines())

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "ScheduleLog":
        log = cls()
        records = []
        for line in lines:
            line = line.strip()
            if line:
                records.append(event_from_dict(json.loads(line)))
        records.sort(key=lambda e: e.global_index)
        for ev in records:
            log.append(ev)
        log.validate()
        return log

    def event_multiset(self) -> dict[tuple, int]:
        """Timing-free content of the log, for cross-seed comparisons.

        Phi events are counted by (worker, operator, txn_id, uid,
        version_tag, config_id); Mu events by (worker, operator,
        request_id, config_id).  Sequence numbers, vtimes and global
        indices are deliberately excluded.
        """
        counts: dict[tuple, int] = {}
        for ev in self._all:
            if isinstance(ev, PhiEvent):
                key = ("phi", ev.worker, ev.operator, ev.txn_id, ev.uid,
                       ev.version_tag, ev.config_id)
            else:
                key = ("mu", ev.worker, ev.operator, ev.request_id, ev.config_id)
            counts[key] = counts.get(key, 0) + 1
        return counts


def event_to_dict(ev: Event) -> dict:
    base = {
        "worker": ev.worker,
        "seq": ev.seq,
        "kind": ev.kind,
        "operator": ev.operator,
        "vtime": ev.vtime,
        "config_id": ev.config_id,
        "global_index": ev.global_index,
    }
    if isinstance(ev, PhiEvent):
        base.update(
            txn_id=ev.txn_id,
            uid=ev.uid,
            parent_uid=ev.parent_uid,
            version_tag=ev.version_tag,
        )
    else:
        base["request_id"] = ev.request_id
    return base


def event_from_dict(rec: dict) -> Event:
    kind = rec.get("kind")
    if kind == "phi":
        return PhiEvent(
            worker=rec["worker"],
            operator=rec["operator"],
            seq=rec["seq"],
            vtime=rec["vtime"],
            txn_id=rec["txn_id"],
            uid=rec["uid"],
            parent_uid=rec.get("parent_uid"),
            version_tag=rec.get("version_tag", 1),
            config_id=rec.get("config_id", ""),
            global_index=rec["global_index"],
        )
    if kind == "mu":
        return MuEvent(
            worker=rec["worker"],
            operator=rec["operator"],
            seq=rec["seq"],
            vtime=rec["vtime"],
            request_id=rec["request_id"],
            config_id=rec.get("config_id", ""),
            global_index=rec["global_index"],
        )
    raise ValueError(f"unknown event kind: {kind!r}")
