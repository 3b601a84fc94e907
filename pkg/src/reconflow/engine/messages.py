"""Message types flowing through channels.

Data tuples, epoch markers (global or component-scoped, optionally carrying
configuration updates), checkpoint markers, and fast control messages.
Control messages bypass data channels entirely: the controller hands them
to a worker's control inbox and the worker picks them up between tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Union

from ..graph.model import Edge, OperatorId


@dataclass
class TupleMsg:
    """One data tuple.

    ``txn_id`` names the data transaction (the source tuple's identity,
    inherited by everything derived from it).  ``uid`` identifies this
    very tuple; children extend the parent's uid, so the derivation tree
    is recoverable.  ``version_tag`` is the configuration version the
    tuple must be processed under while a multi-version switch is active.
    """

    txn_id: str
    uid: str
    payload: dict[str, Any]
    parent_uid: str | None = None
    version_tag: int = 1
    source_vtime: int = 0


@dataclass(frozen=True)
class EpochMarker:
    """Aligned barrier marker, optionally scoped and carrying updates.

    ``scope_edges`` of ``None`` means the marker travels the whole graph
    (a global epoch).  A scoped marker only travels the listed worker
    channels and only requires alignment on them.  ``updates`` maps worker
    ids to configuration updates applied when that worker aligns.
    """

    marker_id: str
    request_id: int | None = None
    scope_vertices: frozenset[OperatorId] | None = None
    scope_edges: frozenset[Edge] | None = None
    updates: Mapping[OperatorId, "ResolvedUpdate"] = field(default_factory=dict)

    @property
    def scoped(self) -> bool:
        return self.scope_edges is not None


@dataclass(frozen=True)
class CheckpointMarker:
    checkpoint_id: int


@dataclass(frozen=True)
class Fcm:
    """Fast control message, delivered outside data channels.

    Kinds:
        ``apply``: switch configuration immediately (direct targets and
            component heads); ``marker`` seeds scoped marker propagation.
        ``install``: install a new configuration next to the current one
            (first phase of a multi-version switch).
        ``retire``: drop the old configuration and log the switch (last
            phase of a multi-version switch).
        ``bump_version``: sources start tagging tuples with ``version``.
        ``inject_epoch``: sources emit the carried epoch marker.
        ``inject_checkpoint``: sources emit a checkpoint marker and
            snapshot their own position.
        ``set_param``: adjust a source function parameter in place.
    """

    kind: str
    request_id: int | None = None
    update: "ResolvedUpdate | None" = None
    marker: EpochMarker | None = None
    checkpoint_id: int | None = None
    version: int | None = None
    params: Mapping[str, Any] | None = None


Message = Union[TupleMsg, EpochMarker, CheckpointMarker]


from .functions import ResolvedUpdate  # noqa: E402  (type used above)
