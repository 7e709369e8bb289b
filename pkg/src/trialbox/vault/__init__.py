from .store import (
    AlreadyRegistered,
    AuditDenied,
    CascadeReport,
    DuplicateTrialCode,
    InvalidNationalId,
    MalformedUid,
    MissingTrialCode,
    OptOutEntry,
    OptedOut,
    PseudonymRecord,
    UidMapping,
    Vault,
    VaultError,
    VaultSecrets,
)

__all__ = [
    "AlreadyRegistered",
    "AuditDenied",
    "CascadeReport",
    "DuplicateTrialCode",
    "InvalidNationalId",
    "MalformedUid",
    "MissingTrialCode",
    "OptOutEntry",
    "OptedOut",
    "PseudonymRecord",
    "UidMapping",
    "Vault",
    "VaultError",
    "VaultSecrets",
]
