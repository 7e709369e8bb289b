from .service import (
    Collector,
    CollectorConfig,
    CollectorError,
    CycleInProgress,
    CycleReport,
    EndpointUnavailable,
    SelectionCriteria,
    TransferReport,
    UpdateReport,
)
from .receiver import Receiver

__all__ = [
    "Collector",
    "CollectorConfig",
    "CollectorError",
    "CycleInProgress",
    "CycleReport",
    "EndpointUnavailable",
    "Receiver",
    "SelectionCriteria",
    "TransferReport",
    "UpdateReport",
]
