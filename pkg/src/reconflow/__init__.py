"""reconflow: runtime reconfiguration for pipelined dataflows.

The package has five parts:

* :mod:`reconflow.graph`: dataflow graphs, minimal covering sub-DAGs,
  reconfiguration-set extension and pruning, parallel expansion,
  blocking-operator segmentation.
* :mod:`reconflow.engine`: a deterministic virtual-time engine and a
  thread-based concurrent engine for running dataflows with epoch markers,
  fast control messages, schedule logging and checkpoints.
* :mod:`reconflow.schedulers`: four reconfiguration schedulers (epoch
  barrier, naive control message, multi-version, component-scoped markers).
* :mod:`reconflow.txncheck`: transaction extraction from schedule logs and
  the conflict-serializability checker.
* :mod:`reconflow.harness`: workflow catalog, experiment runner and CLI.
"""

from . import engine, graph, harness, schedulers, txncheck
from .engine import DeterministicEngine, EngineError, RunConfig, SourceSchedule
from .graph import (DataflowGraph, expand_parallel, expand_targets,
                    extend_reconfig_set, find_mcs, load_graph)
from .schedulers import (schedule_epoch, schedule_fries,
                         schedule_multi_version, schedule_naive_fcm)
from .txncheck import (audit_version_consistency, build_transactions,
                       check_conflict_serializable)

__all__ = [
    "DataflowGraph",
    "DeterministicEngine",
    "EngineError",
    "RunConfig",
    "SourceSchedule",
    "audit_version_consistency",
    "build_transactions",
    "check_conflict_serializable",
    "engine",
    "expand_parallel",
    "expand_targets",
    "extend_reconfig_set",
    "find_mcs",
    "graph",
    "harness",
    "load_graph",
    "schedule_epoch",
    "schedule_fries",
    "schedule_multi_version",
    "schedule_naive_fcm",
    "schedulers",
    "txncheck",
]
__version__ = "0.1.0"
