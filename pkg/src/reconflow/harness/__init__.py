from .registry import known_functions, make_function, make_update, resolve_spec
from .workflows import Workflow, build_workflow, workflow_names

__all__ = [
    "Workflow",
    "build_workflow",
    "known_functions",
    "make_function",
    "make_update",
    "resolve_spec",
    "workflow_names",
]
