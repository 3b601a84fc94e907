"""Built-in operator functions, addressable by name.

Reconfiguration request files and checkpoint artifacts refer to functions
by (name, params); this registry turns those into OperatorFunction
instances.  Everything here is a module-level callable so snapshot
artifacts stay picklable.
"""

from __future__ import annotations

import functools
from typing import Any, Mapping

from ..engine.functions import (FunctionSpec, OperatorFunction, ResolvedUpdate,
                                reset_state)

# ----------------------------------------------------------------- functions


def _pass_through(state, payload):
    return state, [(payload, None)]


def _swallow(state, payload):
    return state, []


def _source_seq(state, payload):
    n = payload["seq"]
    return state, [({"seq": n, "key": str(n)}, None)]


def _source_versioned(state, payload, bump_every):
    n = payload["seq"]
    out = {"seq": n, "key": str(n), "v": 1 + n // bump_every}
    return state, [(out, None)]


def _source_alternate(state, payload, targets):
    n = payload["seq"]
    return state, [({"seq": n, "key": str(n)}, targets[n % len(targets)])]


def _route_round_robin(state, payload, targets):
    i = state.get("i", 0)
    state["i"] = i + 1
    return state, [(payload, targets[i % len(targets)])]


def _route_by_part(state, payload, targets):
    part = payload.get("part", 0)
    return state, [(payload, targets[part % len(targets)])]


def _fanout(state, payload, n):
    return state, [(dict(payload, part=i), None) for i in range(n)]


def _replicate_to(state, payload, targets):
    return state, [(dict(payload, branch=t), t) for t in targets]


def _enrich(state, payload, tag):
    return state, [(dict(payload, tag=tag), None)]


def _window_score(state, payload, width):
    key = str(payload.get("key", ""))
    seen = state.setdefault(key, [])
    seen.append(payload.get("seq", 0))
    del seen[:-width]
    return state, [(dict(payload, score=sum(seen) % 97), None)]


def _filter_mod(state, payload, keep_mod):
    if payload.get("seq", 0) % keep_mod == 0:
        return state, []
    return state, [(payload, None)]


def _pair_join(state, payload):
    """Combine the two replicas of one source tuple; one output per txn."""
    key = payload.get("seq")
    held = state.get(key)
    if held is None:
        state[key] = payload
        return state, []
    del state[key]
    return state, [({"seq": key, "key": str(key), "joined": True}, None)]


def _versioned_check(state, payload):
    expect = state.get("expect", 1)
    ok = payload.get("v", expect) == expect
    return state, [(dict(payload, invalid=not ok), None)]


_BUILDERS: dict[str, Any] = {
    "pass_through": lambda p: _pass_through,
    "swallow": lambda p: _swallow,
    "source_seq": lambda p: _source_seq,
    "source_versioned": lambda p: functools.partial(
        _source_versioned, bump_every=p["bump_every"]),
    "source_alternate": lambda p: functools.partial(
        _source_alternate, targets=tuple(p["targets"])),
    "route_round_robin": lambda p: functools.partial(
        _route_round_robin, targets=tuple(p["targets"])),
    "route_by_part": lambda p: functools.partial(
        _route_by_part, targets=tuple(p["targets"])),
    "fanout": lambda p: functools.partial(_fanout, n=p["n"]),
    "replicate_to": lambda p: functools.partial(
        _replicate_to, targets=tuple(p["targets"])),
    "enrich": lambda p: functools.partial(_enrich, tag=p.get("tag", "x")),
    "window_score": lambda p: functools.partial(
        _window_score, width=p.get("width", 10)),
    "filter_mod": lambda p: functools.partial(
        _filter_mod, keep_mod=p.get("keep_mod", 7)),
    "pair_join": lambda p: _pair_join,
    "versioned_check": lambda p: _versioned_check,
}

# ---------------------------------------------------------------- transforms


def _bump_expect(state):
    state = dict(state)
    state["expect"] = state.get("expect", 1) + 1
    return state


def _failing_transform(state):
    raise ValueError("transform rejected the old state")


_TRANSFORMS = {
    "identity": None,
    "reset": reset_state,
    "bump_expect": _bump_expect,
    "failing": _failing_transform,
}


def known_functions() -> tuple[str, ...]:
    return tuple(sorted(_BUILDERS))


def make_function(name: str, params: Mapping[str, Any] | None = None,
                  *, config_id: str | None = None) -> OperatorFunction:
    params = dict(params or {})
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown function {name!r}; known: {known_functions()}")
    spec = FunctionSpec(name, params)
    return OperatorFunction(builder(params), spec=spec,
                            config_id=config_id or spec.canonical())


def resolve_spec(spec: FunctionSpec) -> OperatorFunction:
    return make_function(spec.name, spec.params)


def make_update(new_function: str | None = None,
                params: Mapping[str, Any] | None = None,
                state_transform: str = "identity",
                *, config_id: str | None = None) -> ResolvedUpdate:
    fn = None
    if new_function is not None:
        fn = make_function(new_function, params, config_id=config_id)
    try:
        transform = _TRANSFORMS[state_transform]
    except KeyError:
        raise KeyError(f"unknown state transform {state_transform!r}; "
                       f"known: {tuple(sorted(_TRANSFORMS))}")
    return ResolvedUpdate(function=fn, transform=transform)
