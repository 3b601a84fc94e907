"""Reconfiguration schedulers.

Each scheduler turns a request (operator -> update) into a ReconfigPlan the
engine controller executes:

* ``schedule_epoch``: barrier reconfiguration.  One marker carrying every
  update is injected at all sources; each target applies on full alignment.
* ``schedule_naive_fcm``: an FCM straight to every target worker, no
  coordination.  Deliberately unsafe; kept as the negative baseline.
* ``schedule_multi_version``: install-alongside, version-tag dispatch,
  retire on drain.  No markers at all.
* ``schedule_fries``: FCMs to the head workers of each component of the
  minimal covering sub-DAG, component-scoped markers inside, with the
  one-to-many extension and optional pruning.
"""

from .plans import (schedule_epoch, schedule_fries, schedule_multi_version,
                    schedule_naive_fcm)

__all__ = [
    "schedule_epoch",
    "schedule_fries",
    "schedule_multi_version",
    "schedule_naive_fcm",
]
