from __future__ import annotations


class EngineError(RuntimeError):
    """Raised when a run cannot continue: arity violations, routing to an
    unknown operator, channel deadlock, or malformed wiring."""
