"""Well-known tag constants used across the pipeline."""

from .model import Tag

TRANSFER_SYNTAX_UID = Tag(0x0002, 0x0010)
MEDIA_STORAGE_SOP_INSTANCE_UID = Tag(0x0002, 0x0003)

SOP_INSTANCE_UID = Tag(0x0008, 0x0018)
STUDY_DATE = Tag(0x0008, 0x0020)
STUDY_TIME = Tag(0x0008, 0x0030)
ACQUISITION_DATETIME = Tag(0x0008, 0x002A)
MODALITY = Tag(0x0008, 0x0060)
PRESENTATION_INTENT_TYPE = Tag(0x0008, 0x0068)
STATION_NAME = Tag(0x0008, 0x1010)
IMAGE_TYPE = Tag(0x0008, 0x0008)
REFERENCED_IMAGE_SEQUENCE = Tag(0x0008, 0x1140)
REFERENCED_SOP_INSTANCE_UID = Tag(0x0008, 0x1155)
SERIES_DESCRIPTION = Tag(0x0008, 0x103E)

PATIENT_NAME = Tag(0x0010, 0x0010)
PATIENT_ID = Tag(0x0010, 0x0020)
PATIENT_BIRTH_DATE = Tag(0x0010, 0x0030)
PATIENT_SEX = Tag(0x0010, 0x0040)
PREGNANCY_STATUS = Tag(0x0010, 0x21C0)

STUDY_INSTANCE_UID = Tag(0x0020, 0x000D)
SERIES_INSTANCE_UID = Tag(0x0020, 0x000E)

ROWS = Tag(0x0028, 0x0010)
COLUMNS = Tag(0x0028, 0x0011)
BITS_ALLOCATED = Tag(0x0028, 0x0100)

PIXEL_DATA = Tag(0x7FE0, 0x0010)
