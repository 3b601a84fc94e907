from .checker import (AFTER, BEFORE, DataTransaction, SerializabilityVerdict,
                      UpdateTransaction, Witness, audit_version_consistency,
                      build_transactions, check_conflict_serializable,
                      verdict_by_enumeration)

__all__ = [
    "AFTER",
    "BEFORE",
    "DataTransaction",
    "SerializabilityVerdict",
    "UpdateTransaction",
    "Witness",
    "audit_version_consistency",
    "build_transactions",
    "check_conflict_serializable",
    "verdict_by_enumeration",
]
