from .model import (
    DataElement,
    DataSet,
    SourceKind,
    Tag,
    VR_BINARY,
    VR_NUMERIC,
    VR_TEXT,
    walk,
)
from .codec import (
    BadMagic,
    DicomCodecError,
    OddLengthUnpadded,
    TruncatedInput,
    UnsupportedTransferSyntax,
    ValueTooLong,
    EXPLICIT_VR_LITTLE_ENDIAN,
    parse_dataset,
    serialize_dataset,
)

__all__ = [
    "BadMagic",
    "DataElement",
    "DataSet",
    "DicomCodecError",
    "EXPLICIT_VR_LITTLE_ENDIAN",
    "OddLengthUnpadded",
    "SourceKind",
    "Tag",
    "TruncatedInput",
    "UnsupportedTransferSyntax",
    "VR_BINARY",
    "VR_NUMERIC",
    "VR_TEXT",
    "ValueTooLong",
    "parse_dataset",
    "serialize_dataset",
    "walk",
]
