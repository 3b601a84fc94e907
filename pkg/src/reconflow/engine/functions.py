"""Operator functions and configuration updates.

An operator function is the user-supplied logic of a logical operator.
The runtime instantiates one state per worker (the function object itself
is shared and must be stateless apart from its parameters).  ``apply``
receives the worker's state and a tuple payload and returns the new state
plus emitted payloads, each optionally addressed to a downstream logical
operator.  Addressing is only needed when a worker has more than one
downstream operator; with a single one the runtime routes unaddressed
output there.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..graph.model import OperatorId

# (payload, downstream logical operator or None for the default route)
Emission = tuple[dict[str, Any], OperatorId | None]
ApplyFn = Callable[[Any, dict[str, Any]], tuple[Any, list[Emission]]]
StateFactory = Callable[[], Any]
TransformFn = Callable[[Any], Any]


@dataclass(frozen=True)
class FunctionSpec:
    """Name plus parameters, enough to rebuild a function from a registry."""

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def canonical(self) -> str:
        bits = ",".join(f"{k}={self.params[k]!r}" for k in sorted(self.params))
        return f"{self.name}({bits})"


class OperatorFunction:
    """Concrete operator logic with a state factory and a config identity."""

    def __init__(
        self,
        apply_fn: ApplyFn,
        *,
        spec: FunctionSpec | None = None,
        config_id: str | None = None,
        initial_state: StateFactory | None = None,
    ) -> None:
        self._apply = apply_fn
        self.spec = spec
        self.config_id = config_id or (spec.canonical() if spec else apply_fn.__name__)
        self._initial_state = initial_state

    def make_state(self) -> Any:
        if self._initial_state is None:
            return {}
        return self._initial_state()

    def apply(self, state: Any, payload: dict[str, Any]) -> tuple[Any, list[Emission]]:
        return self._apply(state, payload)

    def __repr__(self) -> str:  # pragma: no cover
        return f"OperatorFunction({self.config_id})"


@dataclass(frozen=True)
class ResolvedUpdate:
    """A ready-to-apply configuration update for one logical operator.

    ``function`` replaces the operator's logic (None keeps the current
    function, making this a pure state update or an identity update);
    ``transform`` maps the old worker state to the state the new function
    starts from (deep copy when omitted).  A transform that raises aborts
    the reconfiguration request.
    """

    function: OperatorFunction | None = None
    transform: TransformFn | None = None

    def carry_state(self, old_state: Any) -> Any:
        base = copy.deepcopy(old_state)
        if self.transform is None:
            return base
        return self.transform(base)


def passthrough_state(state: Any) -> Any:
    return state


def reset_state(_: Any) -> Any:
    return {}
