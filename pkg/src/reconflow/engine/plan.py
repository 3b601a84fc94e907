"""Reconfiguration plans: what the schedulers hand to the engine.

A plan is pure data computed before the run touches it.  The engine's
controller executes plans; scheduler modules only build them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..graph.model import OperatorId
from .functions import ResolvedUpdate
from .messages import EpochMarker


@dataclass(frozen=True)
class ReconfigPlan:
    """Instructions for one reconfiguration request.

    ``updates`` maps every worker that will log a configuration switch to
    its update (possibly an identity update for workers added only to host
    marker emission).  ``fcm_targets`` are the workers that receive the
    initial fast control messages.  ``markers`` maps an fcm target to the
    marker it must seed, when the strategy uses markers at all.
    """

    scheduler: str
    updates: Mapping[OperatorId, ResolvedUpdate]
    fcm_targets: tuple[OperatorId, ...]
    markers: Mapping[OperatorId, EpochMarker] = field(default_factory=dict)
    info: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.scheduler not in ("epoch", "naive", "multiversion", "fries"):
            raise ValueError(f"unknown scheduler kind: {self.scheduler!r}")
