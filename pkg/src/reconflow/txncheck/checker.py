"""Conflict-serializability analysis over schedule logs.

The conflict model is deliberately small: the only conflicting pairs are a
processing event and a function-update event on the same worker.  Data
transactions never conflict with each other, so the whole question reduces
to a per-transaction test against the single update transaction: a
transaction that has a processing event before some update event and
another after a (possibly different) update event can be placed neither
entirely before nor entirely after the update, and the schedule is not
conflict-serializable.  ``verdict_by_enumeration`` keeps the brute-force
reading alive as an oracle; tests prove both agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Sequence

from ..engine.log import MuEvent, PhiEvent, ScheduleLog
from ..engine.records import ReconfigReport

BEFORE = "before-update"
AFTER = "after-update"


@dataclass
class DataTransaction:
    txn_id: str
    operations: list[PhiEvent]
    # uid -> child uid pairs observed in the log (derivation order)
    lineage_edges: list[tuple[str, str]] = field(default_factory=list)

    def workers(self) -> set[str]:
        return {e.worker for e in self.operations}


@dataclass
class UpdateTransaction:
    request_id: int
    operations: list[MuEvent]

    def worker_mu(self) -> dict[str, MuEvent]:
        return {e.worker: e for e in self.operations}


@dataclass
class Witness:
    txn_id: str
    phi_before_mu: str  # worker where the txn processed under the old config
    mu_before_phi: str  # worker where the update landed first
    phi_seq_before: int
    mu_seq_at_before: int
    mu_seq_at_after: int
    phi_seq_after: int

    def as_dict(self) -> dict:
        return {
            "txn_id": self.txn_id,
            "phi_before_mu": {"worker": self.phi_before_mu,
                              "phi_seq": self.phi_seq_before,
                              "mu_seq": self.mu_seq_at_before},
            "mu_before_phi": {"worker": self.mu_before_phi,
                              "mu_seq": self.mu_seq_at_after,
                              "phi_seq": self.phi_seq_after},
        }


@dataclass
class SerializabilityVerdict:
    serializable: bool
    witness: Witness | None = None
    positions: dict[str, str] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "serializable": self.serializable,
            "witness": self.witness.as_dict() if self.witness else None,
            "positions": dict(self.positions),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def build_transactions(
    log: ScheduleLog,
) -> tuple[list[DataTransaction], UpdateTransaction | None]:
    by_txn: dict[str, list[PhiEvent]] = {}
    for ev in log.phi_events():
        by_txn.setdefault(ev.txn_id, []).append(ev)
    txns = []
    for txn_id in sorted(by_txn):
        ops = sorted(by_txn[txn_id], key=lambda e: e.global_index)
        edges = [(e.parent_uid, e.uid) for e in ops if e.parent_uid is not None]
        txns.append(DataTransaction(txn_id, ops, edges))

    mus = sorted(log.mu_events(), key=lambda e: e.global_index)
    if not mus:
        return txns, None
    requests = {e.request_id for e in mus}
    if len(requests) > 1:
        raise ValueError(
            f"log contains update events from {len(requests)} requests "
            f"({sorted(requests)}); one reconfiguration at a time")
    return txns, UpdateTransaction(requests.pop(), mus)


def check_conflict_serializable(log: ScheduleLog) -> SerializabilityVerdict:
    txns, update = build_transactions(log)
    if update is None:
        return SerializabilityVerdict(
            True, positions={t.txn_id: BEFORE for t in txns})
    mu_at = update.worker_mu()
    positions: dict[str, str] = {}
    for txn in txns:
        before = None  # (worker, phi_seq, mu_seq): processed pre-update
        after = None
        for phi in txn.operations:
            mu = mu_at.get(phi.worker)
            if mu is None:
                continue
            if phi.seq < mu.seq and before is None:
                before = (phi.worker, phi.seq, mu.seq)
            elif phi.seq > mu.seq and after is None:
                after = (phi.worker, mu.seq, phi.seq)
            if before and after:
                return SerializabilityVerdict(False, Witness(
                    txn.txn_id,
                    phi_before_mu=before[0], mu_before_phi=after[0],
                    phi_seq_before=before[1], mu_seq_at_before=before[2],
                    mu_seq_at_after=after[1], phi_seq_after=after[2]))
        if after:
            positions[txn.txn_id] = AFTER
        else:
            # no conflicts at all leaves the position free; before-update
            # is always consistent then
            positions[txn.txn_id] = BEFORE
    return SerializabilityVerdict(True, positions=positions)


def verdict_by_enumeration(log: ScheduleLog) -> bool:
    """Brute force: try every serial order of the transactions.

    A serial candidate is conflict-equivalent to the log iff every
    conflicting pair is ordered the same way in both.  Exponential; only
    for small logs and for validating the fast path.
    """
    txns, update = build_transactions(log)
    if update is None:
        return True
    mu_at = update.worker_mu()
    # observed order of every conflicting pair: txn op vs update op
    constraints = []  # (txn_id, True if phi observed before mu)
    for txn in txns:
        for phi in txn.operations:
            mu = mu_at.get(phi.worker)
            if mu is not None:
                constraints.append((txn.txn_id, phi.seq < mu.seq))
    units: list[str | None] = [t.txn_id for t in txns] + [None]  # None = update
    for order in permutations(units):
        pos = {u: i for i, u in enumerate(order)}
        ok = all((pos[txn_id] < pos[None]) == phi_first
                 for txn_id, phi_first in constraints)
        if ok:
            return True
    return False


def audit_version_consistency(
    log: ScheduleLog,
    reports: Sequence[ReconfigReport] | None,
) -> tuple[bool, list[dict]]:
    """Every processing event ran under the config its version tag selects.

    ``reports`` carry the per-worker (old, new) config pairs and the bump
    version of each applied multi-version reconfiguration; these are the
    version records the audit joins against.
    """
    switches = []
    if reports:
        switches = sorted(
            (r for r in reports
             if r.scheduler == "multiversion" and r.status == "applied"
             and r.version is not None),
            key=lambda r: r.version)
    max_tag = max((e.version_tag for e in log.phi_events()), default=1)
    covered = max((r.version for r in switches), default=1)
    if max_tag > covered:
        raise ValueError(
            f"log carries version tag {max_tag} but version records only "
            f"cover up to {covered}: missing version records")

    expected: dict[tuple[str, int], str] = {}

    def config_for(worker: str, tag: int) -> str | None:
        key = (worker, tag)
        if key not in expected:
            cfg = None
            for rep in switches:
                old, new = rep.config_switch.get(worker, (None, None))
                if old is None:
                    continue
                if cfg is None:
                    cfg = old
                if tag >= rep.version:
                    cfg = new
            expected[key] = cfg
        return expected[key]

    violations = []
    for ev in log.phi_events():
        want = config_for(ev.worker, ev.version_tag)
        if want is not None and ev.config_id != want:
            violations.append({
                "worker": ev.worker, "txn_id": ev.txn_id, "seq": ev.seq,
                "version_tag": ev.version_tag,
                "config_id": ev.config_id, "expected": want,
            })
    return not violations, violations
