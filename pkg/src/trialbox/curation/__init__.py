from .pipeline import (
    CurationError,
    CurationManifest,
    CurationPipeline,
    ExportCriteria,
    ExportReport,
    MissingStage1Pseudonym,
    UnknownLicensee,
    filter_clinical_record,
)

__all__ = [
    "CurationError",
    "CurationManifest",
    "CurationPipeline",
    "ExportCriteria",
    "ExportReport",
    "MissingStage1Pseudonym",
    "UnknownLicensee",
    "filter_clinical_record",
]
