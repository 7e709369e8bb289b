"""Synthetic hospital corpus: studies with planted identifier sentinels.

Every identifier-bearing tag written into a generated image carries a
unique sentinel value, recorded per study, so downstream tests can prove
by byte scan that nothing survives de-identification. Sentinel dates are
kept strictly before 1940 on a sparse 400-day grid: a per-client offset of
at most 364 days can therefore never shift one planted date onto another,
and birth years (1940-1989) can never collide with a planted date string.

Generation is fully deterministic under a fixed seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import date, timedelta

from ..dicom import DataElement, DataSet, Tag, serialize_dataset
from ..dicom import tags as T

BURN_IN_STATION = "BURNIN-1"
DIGITISER_STATION = "DIGITISER-1"
PLAIN_STATION = "ST-A"

_SENTINEL_DATE_BASE = date(800, 1, 1)
_SENTINEL_DATE_STRIDE = 400
_SENTINEL_DATE_CEILING = date(1940, 1, 1)


@dataclass
class CorpusSpec:
    n_clients: int = 10
    studies_per_client: int = 1
    pct_positive: float = 20.0
    pct_unprocessed: float = 20.0
    pct_burn_in: float = 10.0
    n_dose_reports: int = 0
    seed: int = 1234

    def __post_init__(self):
        for name in ("pct_positive", "pct_unprocessed", "pct_burn_in"):
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise ValueError(f"{name} must be in [0, 100], got {value}")


@dataclass
class SimStudy:
    national_id: str
    local_id: str
    study_uid: str
    series_uids: list[str]
    image_uids: list[str]
    modality: str
    study_date: str
    has_unprocessed: bool
    burn_in_station: bool
    phi_sentinels: dict[str, object] = field(default_factory=dict)
    is_dose_report: bool = False


@dataclass
class ClinicalEpisode:
    local_id: str
    episode_id: str
    outcome: str  # normal | recall | biopsy-benign | biopsy-malignant | pending
    outcome_date: str
    revised_from: str | None = None
    national_id: str = ""
    created_at: str = ""

    def as_dict(self) -> dict:
        return {
            "local_id": self.local_id,
            "episode_id": self.episode_id,
            "outcome": self.outcome,
            "outcome_date": self.outcome_date,
            "revised_from": self.revised_from,
            "national_id": self.national_id,
            "created_at": self.created_at,
        }


@dataclass
class Corpus:
    studies: list[SimStudy]
    episodes: list[ClinicalEpisode]
    images: dict[str, bytes]  # image uid -> .dcm payload
    study_images: dict[str, list[str]]  # study uid -> image uids

    def sentinel_strings(self) -> set[str]:
        """Planted values safe to grep for as raw bytes.

        Digit-only value classes (dates, times, decimals, numerics) are
        excluded: a six-digit time is too easy to find by accident inside
        a legitimate date or counter. Those are checked element-wise via
        planted_by_tag() instead.
        """
        values: set[str] = set()
        for study in self.studies:
            values.add(study.national_id)
            values.add(study.local_id)
            values.add(study.study_uid)
            values.update(study.series_uids)
            values.update(study.image_uids)
            for planted in study.phi_sentinels.values():
                if isinstance(planted, str) and not planted.replace(".", "").isdigit():
                    values.add(planted)
        return values

    def planted_by_tag(self) -> dict[str, set]:
        """tag -> set of planted values, for element-wise residue checks."""
        by_tag: dict[str, set] = {}
        for study in self.studies:
            for tag, value in study.phi_sentinels.items():
                by_tag.setdefault(tag, set()).add(value)
        return by_tag

    def episodes_for(self, local_id: str) -> list[ClinicalEpisode]:
        return [e for e in self.episodes if e.local_id == local_id]


class _SentinelFactory:
    """Unique, collision-proof sentinel values per VR class.

    Each kind draws from its own counter; planted date strings sit on a
    sparse grid so no per-client offset can map one onto another.
    """

    def __init__(self):
        self._counters: dict[str, int] = {}

    def _next(self, kind: str) -> int:
        self._counters[kind] = self._counters.get(kind, 0) + 1
        return self._counters[kind]

    def text(self) -> str:
        return f"ZSENT{self._next('text'):06d}"

    def person_name(self) -> str:
        return f"ZZSENT{self._next('person'):06d}^PHI"

    def date_str(self) -> str:
        planted = _SENTINEL_DATE_BASE + timedelta(days=self._next("date") * _SENTINEL_DATE_STRIDE)
        if planted.month == 1 and planted.day == 1:
            planted += timedelta(days=1)  # never collide with birth-rule output
        if planted >= _SENTINEL_DATE_CEILING:
            raise RuntimeError("sentinel date space exhausted; corpus too large")
        return f"{planted.year:04d}{planted.month:02d}{planted.day:02d}"

    def time_str(self) -> str:
        n = self._next("time") % 86399 + 1  # never the zeroed-time output
        return f"{n // 3600:02d}{(n // 60) % 60:02d}{n % 60:02d}"

    def datetime_str(self) -> str:
        return self.date_str() + self.time_str()

    def decimal_str(self) -> str:
        return f"{self._next('decimal')}.5"

    def uid(self) -> str:
        return f"1.9.9.{self._next('uid')}"

    def opaque(self) -> bytes:
        return f"SENTBYTES{self._next('opaque'):07d}".encode("ascii")

    def numeric(self) -> int:
        return (self._next("numeric") % 9) + 1


def _valid_nhs_number(rng: random.Random, taken: set[str]) -> str:
    while True:
        first_nine = [rng.randint(0, 9) for _ in range(9)]
        total = sum((10 - i) * d for i, d in enumerate(first_nine))
        check = 11 - (total % 11)
        if check == 11:
            check = 0
        if check == 10:
            continue
        candidate = "".join(map(str, first_nine)) + str(check)
        if candidate not in taken:
            taken.add(candidate)
            return candidate


def _pixel_ramp(rows: int, cols: int) -> bytearray:
    return bytearray((i % 251) + 1 for i in range(rows * cols))


# Plantable sentinel kinds per VR for the rotation over policy rows.
_VR_SENTINEL = {
    "AE": "text",
    "CS": "text",
    "DA": "date",
    "DS": "decimal",
    "DT": "datetime",
    "LO": "text",
    "LT": "text",
    "PN": "person",
    "SH": "text",
    "ST": "text",
    "TM": "time",
    "UI": "uid",
    "US": "numeric",
    "OB": "opaque",
}


# Policy-governed tags every generated image already carries; the rotation
# must not overwrite these (identity and linkage depend on them).
_BASE_POLICY_TAGS = frozenset(
    Tag.parse(t)
    for t in (
        "0002,0003",
        "0008,0018",
        "0008,0020",
        "0008,0021",
        "0008,0022",
        "0008,0023",
        "0008,0030",
        "0008,0031",
        "0008,0032",
        "0008,0050",
        "0008,0080",
        "0008,0090",
        "0008,1010",
        "0008,1030",
        "0008,1070",
        "0008,1140",
        "0010,0010",
        "0010,0020",
        "0010,0030",
        "0010,0040",
        "0010,1000",
        "0010,1040",
        "0010,21C0",
        "0010,4000",
        "0020,000D",
        "0020,000E",
        "0020,0010",
        "5000,2000",
        "6000,3000",
        "6000,4000",
    )
)


def _policy_rotation_rows() -> list[tuple[Tag, str]]:
    """Plantable policy rows beyond the base image set, one representative per rule."""
    from ..deid.policy import builtin_policy

    rows: list[tuple[Tag, str]] = []
    for pol in builtin_policy():
        if pol.pattern == "private":
            continue
        if pol.is_exact:
            tag = Tag.parse(pol.pattern)
        else:
            tag = Tag.parse(pol.pattern.replace("X", "0"))
        if tag.group == 0x0002 or tag in _BASE_POLICY_TAGS:
            continue
        if pol.action.kind.value == "clear_sequence":
            rows.append((tag, "SQ"))
        elif pol.vr in _VR_SENTINEL:
            rows.append((tag, pol.vr))
    return rows


def seed(spec: CorpusSpec) -> Corpus:
    """Generate the deterministic corpus described by ``spec``."""
    rng = random.Random(spec.seed)
    sentinels = _SentinelFactory()
    rotation = _policy_rotation_rows()
    taken_ids: set[str] = set()

    clients = []
    for i in range(spec.n_clients):
        clients.append(
            {
                "national_id": _valid_nhs_number(rng, taken_ids),
                "local_id": f"H{rng.randint(1000000, 9999999)}{i}",
                "birth_year": 1940 + (i % 50),
            }
        )

    n_positive = round(spec.n_clients * spec.pct_positive / 100)
    positive_idx = set(rng.sample(range(spec.n_clients), n_positive)) if spec.n_clients else set()
    n_unprocessed = round(spec.n_clients * spec.pct_unprocessed / 100)
    unprocessed_idx = set(rng.sample(range(spec.n_clients), n_unprocessed)) if spec.n_clients else set()
    n_burn_in = round(spec.n_clients * spec.pct_burn_in / 100)
    burn_in_idx = set(rng.sample(range(spec.n_clients), n_burn_in)) if spec.n_clients else set()

    studies: list[SimStudy] = []
    episodes: list[ClinicalEpisode] = []
    images: dict[str, bytes] = {}
    study_images: dict[str, list[str]] = {}
    uid_seq = 0
    episode_seq = 0
    rotation_cursor = 0

    def next_uid() -> str:
        nonlocal uid_seq
        uid_seq += 1
        return f"1.9.1.{spec.seed % 100000}.{uid_seq}"

    study_counter = 0
    for idx, client in enumerate(clients):
        base = date(2022, 1, 1) + timedelta(days=rng.randint(0, 600))
        for study_no in range(spec.studies_per_client):
            study_counter += 1
            study_date = base + timedelta(days=370 * study_no)
            has_unprocessed = idx in unprocessed_idx and study_no == 0
            burn_in = idx in burn_in_idx and study_no == 0
            extra_rows = [
                rotation[(rotation_cursor + j) % len(rotation)] for j in range(30)
            ]
            rotation_cursor += 30
            study, study_files = _build_study(
                client,
                study_date,
                next_uid,
                sentinels,
                extra_rows,
                has_unprocessed=has_unprocessed,
                burn_in=burn_in,
            )
            studies.append(study)
            images.update(study_files)
            study_images[study.study_uid] = list(study_files.keys())

            episode_seq += 1
            if idx in positive_idx:
                outcome = "biopsy-malignant" if idx % 2 == 0 else "biopsy-benign"
            else:
                outcome = "normal"
            episodes.append(
                ClinicalEpisode(
                    local_id=client["local_id"],
                    episode_id=f"EP{episode_seq:06d}",
                    outcome=outcome,
                    outcome_date=(study_date + timedelta(days=14)).isoformat(),
                    national_id=client["national_id"],
                    created_at=(study_date + timedelta(days=1)).isoformat(),
                )
            )

    for n in range(spec.n_dose_reports):
        client = clients[n % len(clients)] if clients else None
        if client is None:
            break
        study_counter += 1
        study, study_files = _build_dose_report(client, next_uid, sentinels)
        studies.append(study)
        images.update(study_files)
        study_images[study.study_uid] = list(study_files.keys())
        episode_seq += 1
        episodes.append(
            ClinicalEpisode(
                local_id=client["local_id"],
                episode_id=f"EP{episode_seq:06d}",
                outcome="normal",
                outcome_date=study.study_date,
                national_id=client["national_id"],
                created_at=study.study_date,
            )
        )

    return Corpus(studies=studies, episodes=episodes, images=images, study_images=study_images)


def _build_study(
    client: dict,
    study_date: date,
    next_uid,
    sentinels: _SentinelFactory,
    extra_rows: list[tuple[Tag, str]],
    has_unprocessed: bool,
    burn_in: bool,
) -> tuple[SimStudy, dict[str, bytes]]:
    planted: dict[str, object] = {}
    study_uid = next_uid()
    da_study = f"{study_date.year:04d}{study_date.month:02d}{study_date.day:02d}"
    birth_year = client["birth_year"]
    birth = f"{birth_year:04d}{2 + birth_year % 11:02d}{2 + birth_year % 26:02d}"
    patient_name = sentinels.person_name()
    planted[str(T.PATIENT_NAME)] = patient_name
    planted[str(T.PATIENT_BIRTH_DATE)] = birth

    series_uids = [next_uid(), next_uid()]
    image_uids: list[str] = []
    files: dict[str, bytes] = {}

    station = BURN_IN_STATION if burn_in else PLAIN_STATION
    accession = sentinels.text()
    planted[str(Tag(0x0008, 0x0050))] = accession
    institution = sentinels.text()
    planted[str(Tag(0x0008, 0x0080))] = institution
    referring = sentinels.person_name()
    planted[str(Tag(0x0008, 0x0090))] = referring
    operators = sentinels.person_name()
    planted[str(Tag(0x0008, 0x1070))] = operators
    study_desc = sentinels.text()
    planted[str(Tag(0x0008, 0x1030))] = study_desc
    comments = sentinels.text()
    planted[str(Tag(0x0010, 0x4000))] = comments
    other_ids = sentinels.text()
    planted[str(Tag(0x0010, 0x1000))] = other_ids
    address = sentinels.text()
    planted[str(Tag(0x0010, 0x1040))] = address
    private_value = sentinels.text()
    planted["0009,0010"] = private_value
    overlay_comment = sentinels.text()
    planted["6000,4000"] = overlay_comment
    overlay_data = sentinels.opaque()
    planted["6000,3000"] = overlay_data.decode("ascii")
    curve_data = sentinels.opaque()
    planted["5000,2000"] = curve_data.decode("ascii")

    rows, cols = 64, 64

    def build_image(series_idx: int, image_no: int, intent: str, prior_uid: str | None):
        image_uid = next_uid()
        image_uids.append(image_uid)
        ramp = _pixel_ramp(rows, cols)
        if burn_in:
            for y in range(8):
                start = y * cols
                ramp[start : start + 32] = b"\xff" * 32
        elements = [
            DataElement(T.TRANSFER_SYNTAX_UID, "UI", "1.2.840.10008.1.2.1"),
            DataElement(T.MEDIA_STORAGE_SOP_INSTANCE_UID, "UI", image_uid),
            DataElement(T.IMAGE_TYPE, "CS", "ORIGINAL\\PRIMARY"),
            DataElement(T.SOP_INSTANCE_UID, "UI", image_uid),
            DataElement(T.STUDY_DATE, "DA", da_study),
            DataElement(Tag(0x0008, 0x0021), "DA", da_study),
            DataElement(Tag(0x0008, 0x0022), "DA", da_study),
            DataElement(Tag(0x0008, 0x0023), "DA", da_study),
            DataElement(T.STUDY_TIME, "TM", "101530"),
            DataElement(Tag(0x0008, 0x0031), "TM", "101630"),
            DataElement(Tag(0x0008, 0x0032), "TM", "101645"),
            DataElement(Tag(0x0008, 0x0050), "SH", accession),
            DataElement(T.MODALITY, "CS", "MG"),
            DataElement(T.PRESENTATION_INTENT_TYPE, "CS", intent),
            DataElement(Tag(0x0008, 0x0070), "LO", "ACME Imaging"),
            DataElement(Tag(0x0008, 0x0080), "LO", institution),
            DataElement(Tag(0x0008, 0x0090), "PN", referring),
            DataElement(T.STATION_NAME, "SH", station),
            DataElement(Tag(0x0008, 0x1030), "LO", study_desc),
            DataElement(Tag(0x0008, 0x1070), "PN", operators),
            DataElement(T.PATIENT_NAME, "PN", patient_name),
            DataElement(T.PATIENT_ID, "LO", client["local_id"]),
            DataElement(T.PATIENT_BIRTH_DATE, "DA", birth),
            DataElement(T.PATIENT_SEX, "CS", "F"),
            DataElement(Tag(0x0010, 0x1000), "LO", other_ids),
            DataElement(Tag(0x0010, 0x1040), "LO", address),
            DataElement(T.PREGNANCY_STATUS, "US", (2,)),
            DataElement(Tag(0x0010, 0x4000), "LT", comments),
            DataElement(T.STUDY_INSTANCE_UID, "UI", study_uid),
            DataElement(T.SERIES_INSTANCE_UID, "UI", series_uids[series_idx]),
            DataElement(Tag(0x0020, 0x0010), "SH", f"SID{image_no}"),
            DataElement(T.ROWS, "US", (rows,)),
            DataElement(T.COLUMNS, "US", (cols,)),
            DataElement(T.BITS_ALLOCATED, "US", (8,)),
            DataElement(Tag(0x0009, 0x0010), "LO", private_value),
            DataElement(Tag(0x5000, 0x2000), "OB", curve_data),
            DataElement(Tag(0x6000, 0x3000), "OB", overlay_data),
            DataElement(Tag(0x6000, 0x4000), "LT", overlay_comment),
            DataElement(T.PIXEL_DATA, "OW", bytes(ramp)),
        ]
        if prior_uid is not None:
            item = DataSet(
                [
                    DataElement(Tag(0x0008, 0x1150), "UI", "1.2.840.10008.5.1.4.1.1.1.2"),
                    DataElement(T.REFERENCED_SOP_INSTANCE_UID, "UI", prior_uid),
                ]
            )
            elements.append(DataElement(T.REFERENCED_IMAGE_SEQUENCE, "SQ", (item,)))
        return image_uid, elements

    # Two presentation series of two images; each image references its
    # predecessor and carries a stripe of the rotation rows.
    prior: str | None = None
    image_no = 0
    for series_idx in range(2):
        for _ in range(2):
            image_no += 1
            image_uid, elements = build_image(series_idx, image_no, "FOR PRESENTATION", prior)
            for tag, vr in extra_rows[image_no - 1 :: 4]:
                elements.extend(_plant(tag, vr, sentinels, planted))
            ds = DataSet(elements)
            files[image_uid] = serialize_dataset(ds)
            prior = image_uid

    if has_unprocessed:
        raw_series = next_uid()
        series_uids.append(raw_series)
        for _ in range(2):
            image_no += 1
            image_uid, elements = build_image(2, image_no, "FOR PROCESSING", None)
            elements = [
                el if el.tag != T.SERIES_INSTANCE_UID else DataElement(T.SERIES_INSTANCE_UID, "UI", raw_series)
                for el in elements
            ]
            files[image_uid] = serialize_dataset(DataSet(elements))

    study = SimStudy(
        national_id=client["national_id"],
        local_id=client["local_id"],
        study_uid=study_uid,
        series_uids=series_uids,
        image_uids=image_uids,
        modality="MG",
        study_date=da_study,
        has_unprocessed=has_unprocessed,
        burn_in_station=burn_in,
        phi_sentinels=planted,
    )
    return study, files


def _plant(tag: Tag, vr: str, sentinels: _SentinelFactory, planted: dict) -> list[DataElement]:
    if vr == "SQ":
        value = sentinels.person_name()
        items = (
            DataSet(
                [
                    DataElement(Tag(0x0008, 0x0104), "LO", sentinels.text()),
                    DataElement(Tag(0x0008, 0x1199), "PN", value),
                ]
            ),
        )
        planted[str(tag)] = value
        return [DataElement(tag, "SQ", items)]
    kind = _VR_SENTINEL[vr]
    if kind == "text":
        value: object = sentinels.text()
    elif kind == "person":
        value = sentinels.person_name()
    elif kind == "date":
        value = sentinels.date_str()
    elif kind == "time":
        value = sentinels.time_str()
    elif kind == "datetime":
        value = sentinels.datetime_str()
    elif kind == "decimal":
        value = sentinels.decimal_str()
    elif kind == "uid":
        value = sentinels.uid()
    elif kind == "numeric":
        value = sentinels.numeric()
    else:  # opaque
        raw = sentinels.opaque()
        planted[str(tag)] = raw.decode("ascii")
        return [DataElement(tag, vr, raw)]
    planted[str(tag)] = value
    element_value = (value,) if vr == "US" else value
    return [DataElement(tag, vr, element_value)]


def _build_dose_report(client: dict, next_uid, sentinels: _SentinelFactory) -> tuple[SimStudy, dict[str, bytes]]:
    """A dose summary disguised as an image: SC secondary capture, one frame."""
    study_uid = next_uid()
    series_uid = next_uid()
    image_uid = next_uid()
    rows = cols = 32
    patient_name = sentinels.person_name()
    ds = DataSet(
        [
            DataElement(T.TRANSFER_SYNTAX_UID, "UI", "1.2.840.10008.1.2.1"),
            DataElement(T.MEDIA_STORAGE_SOP_INSTANCE_UID, "UI", image_uid),
            DataElement(T.IMAGE_TYPE, "CS", "DERIVED\\SECONDARY"),
            DataElement(T.SOP_INSTANCE_UID, "UI", image_uid),
            DataElement(T.STUDY_DATE, "DA", "20230501"),
            DataElement(T.STUDY_TIME, "TM", "090000"),
            DataElement(T.MODALITY, "CS", "SC"),
            DataElement(T.STATION_NAME, "SH", DIGITISER_STATION),
            DataElement(Tag(0x0008, 0x103E), "LO", "Dose Report"),
            DataElement(T.PATIENT_NAME, "PN", patient_name),
            DataElement(T.PATIENT_ID, "LO", client["local_id"]),
            DataElement(T.PATIENT_BIRTH_DATE, "DA", f"{client['birth_year']}0315"),
            DataElement(T.STUDY_INSTANCE_UID, "UI", study_uid),
            DataElement(T.SERIES_INSTANCE_UID, "UI", series_uid),
            DataElement(T.ROWS, "US", (rows,)),
            DataElement(T.COLUMNS, "US", (cols,)),
            DataElement(T.BITS_ALLOCATED, "US", (8,)),
            DataElement(T.PIXEL_DATA, "OW", bytes(_pixel_ramp(rows, cols))),
        ]
    )
    study = SimStudy(
        national_id=client["national_id"],
        local_id=client["local_id"],
        study_uid=study_uid,
        series_uids=[series_uid],
        image_uids=[image_uid],
        modality="SC",
        study_date="20230501",
        has_unprocessed=False,
        burn_in_station=False,
        phi_sentinels={str(T.PATIENT_NAME): patient_name},
        is_dose_report=True,
    )
    return study, {image_uid: serialize_dataset(ds)}
