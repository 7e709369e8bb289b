"""Central-side curation: second pseudonymisation layer and publication.

Batches arriving from site transfers are walked through seven steps:
intake to first-stage storage, secondary pseudonymisation with an
independent vault and salts, pixel scanning, flagging of digitised scans
and dose reports disguised as images, linkage-file production, filtering
of the clinical record down to a researcher whitelist, and atomic
publication. A study failing a step is quarantined; the batch continues.

The stage-2 vault never sees anything but stage-1 pseudonyms, so published
data cannot be walked back to site-level pseudonyms, let alone to clients.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..deid import Stage, apply as deid_apply
from ..deid.engine import DeidError
from ..dicom import DataSet, parse_dataset, serialize_dataset
from ..dicom.codec import DicomCodecError
from ..dicom import tags as T
from ..nhs import validate_national_id
from ..vault import CascadeReport, Vault, VaultSecrets


class CurationError(Exception):
    pass


class MissingStage1Pseudonym(CurationError):
    pass


class UnknownLicensee(CurationError):
    pass


@dataclass
class CurationManifest:
    batch_id: str
    inputs: list = field(default_factory=list)  # stage-1 pseudonyms
    outputs: list = field(default_factory=list)  # stage-2 pseudonyms
    step_results: dict = field(default_factory=dict)  # step number -> {passed, details}
    published_at: str | None = None
    quarantined: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "step_results": self.step_results,
            "published_at": self.published_at,
            "quarantined": self.quarantined,
        }


@dataclass
class ExportReport:
    licensee: str
    clients: int = 0
    studies: int = 0
    files: int = 0
    bytes: int = 0
    empty: bool = False

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class ExportCriteria:
    outcomes: set = field(default_factory=set)  # empty = all
    modalities: set = field(default_factory=set)
    max_clients: int | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ExportCriteria":
        raw = json.loads(Path(path).read_text())
        return cls(
            outcomes=set(raw.get("outcomes", [])),
            modalities=set(raw.get("modalities", [])),
            max_clients=raw.get("max_clients"),
        )


_PSEUDONYM_RE = re.compile(r"^[A-Za-z0-9]+-\d{8}$")

LINKAGE_HEADER = ["client_s2", "study_s2", "series_s2", "image_s2"]


class CurationPipeline:
    def __init__(
        self,
        root: str | Path,
        secrets: VaultSecrets | None = None,
        whitelist: set | None = None,
    ):
        self.root = Path(root)
        self.stage1_dir = self.root / "stage1"
        self.published_dir = self.root / "published"
        self.quarantine_dir = self.root / "quarantine"
        self.state_dir = self.root / "state"
        for directory in (self.stage1_dir, self.published_dir, self.quarantine_dir,
                          self.state_dir, self.state_dir / "manifests"):
            directory.mkdir(parents=True, exist_ok=True)
        secrets = secrets or VaultSecrets.from_env()
        self.vault = Vault(
            self.state_dir / "vault2.bin",
            secrets,
            site_prefix="D",
            uid_scope="stage2",
            validate_ids=False,
        )
        self.vault.register_artifact_root("published", self.published_dir)
        self.whitelist = set(whitelist or {"episodes.outcome", "episodes.revised_from"})
        self._licensees_path = self.state_dir / "licensees.json"
        self._exports_path = self.state_dir / "export_destinations.json"
        self._audit_path = self.state_dir / "export_audit.jsonl"
        self._index_path = self.state_dir / "published_index.json"
        for dest in self._load_json(self._exports_path, []):
            self.vault.register_artifact_root("published", Path(dest))

    # -- small state helpers ----------------------------------------------

    @staticmethod
    def _load_json(path: Path, default):
        if path.exists():
            return json.loads(path.read_text())
        return default

    @staticmethod
    def _save_json(path: Path, data) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        os.replace(tmp, path)

    def register_licensee(self, licensee_id: str, name: str = "") -> None:
        licensees = self._load_json(self._licensees_path, {})
        licensees[licensee_id] = {"name": name or licensee_id}
        self._save_json(self._licensees_path, licensees)

    def licensees(self) -> dict:
        return self._load_json(self._licensees_path, {})

    # -- the seven-step pipeline ---------------------------------------------

    def run_pipeline(self, batch_dir: str | Path) -> CurationManifest:
        batch_dir = Path(batch_dir)
        batch_id = f"batch-{datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%S')}-{os.getpid()}"
        manifest = CurationManifest(batch_id=batch_id)

        studies = self._discover_batch(batch_dir)
        manifest.inputs = sorted({s1 for s1, _ in studies})
        if not studies:
            for step in range(1, 8):
                manifest.step_results[str(step)] = {"passed": True, "details": "empty batch"}
            self._persist_manifest(manifest)
            return manifest

        # Step 1: intake into first-stage storage.
        intake: list[tuple[str, Path]] = []
        for s1_pseudonym, study_dir in studies:
            dest = self.stage1_dir / s1_pseudonym / study_dir.name
            if not dest.exists():
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.copytree(study_dir, dest)
            intake.append((s1_pseudonym, dest))
        manifest.step_results["1"] = {"passed": True, "details": f"{len(intake)} studies staged"}

        # Steps 2-6 run per study; failures quarantine the study only.
        prepared = []
        outputs: set[str] = set()
        flagged: list[dict] = []
        for s1_pseudonym, study_dir in intake:
            try:
                bundle = self._prepare_study(s1_pseudonym, study_dir, flagged)
                prepared.append(bundle)
                outputs.add(bundle["client_s2"])
            except CurationError as exc:
                self._quarantine_study(study_dir, str(exc))
                manifest.quarantined.append({"study": study_dir.name, "reason": str(exc)})
        manifest.outputs = sorted(outputs)
        manifest.step_results["2"] = {
            "passed": True,
            "details": f"{len(prepared)} studies re-pseudonymised",
        }
        manifest.step_results["3"] = {
            "passed": True,
            "details": f"{sum(1 for f in flagged if f['kind'] == 'burn-in-suspect')} burn-in suspects",
        }
        manifest.step_results["4"] = {
            "passed": True,
            "details": f"{sum(1 for f in flagged if f['kind'] != 'burn-in-suspect')} flagged scans",
        }
        manifest.step_results["5"] = {
            "passed": True,
            "details": f"{sum(len(b['linkage']) for b in prepared)} linkage rows",
        }
        manifest.step_results["6"] = {"passed": True, "details": "records filtered"}

        # Step 7: publish, only when steps 1-6 all passed.
        if all(manifest.step_results[str(n)]["passed"] for n in range(1, 7)):
            published = 0
            for bundle in prepared:
                if self._publish_study(bundle):
                    published += 1
            self._rebuild_linkage_file()
            manifest.step_results["7"] = {"passed": True, "details": f"{published} studies published"}
            manifest.published_at = datetime.now(timezone.utc).isoformat()
        self._persist_manifest(manifest)
        return manifest

    def _discover_batch(self, batch_dir: Path) -> list[tuple[str, Path]]:
        studies = []
        if not batch_dir.is_dir():
            return studies
        for client_dir in sorted(p for p in batch_dir.iterdir() if p.is_dir() and not p.name.startswith(".")):
            for study_dir in sorted(p for p in client_dir.iterdir() if p.is_dir()):
                studies.append((client_dir.name, study_dir))
        return studies

    def _prepare_study(self, s1_pseudonym: str, study_dir: Path, flagged: list[dict]) -> dict:
        if not s1_pseudonym or not _PSEUDONYM_RE.match(s1_pseudonym):
            raise MissingStage1Pseudonym(f"directory {s1_pseudonym!r} is not a stage-1 pseudonym")
        record = self.vault.find_by_local_id(s1_pseudonym)
        if record is None:
            record = self.vault.register_client(s1_pseudonym, s1_pseudonym, s1_pseudonym)
        images = []
        linkage = []
        modalities = set()
        with self.vault.deferred_flush():
            for path in sorted(study_dir.glob("*.dcm")):
                try:
                    ds = parse_dataset(path.read_bytes())
                except DicomCodecError as exc:
                    raise CurationError(f"unparseable image {path.name}: {exc}")
                if not ds.text(T.PATIENT_ID):
                    raise MissingStage1Pseudonym(f"{path.name} carries no stage-1 pseudonym")
                self._flag_suspects(ds, path, flagged)
                if self._is_disguised_scan(ds):
                    raise CurationError(f"flagged non-imaging object in {path.name}")
                try:
                    out, _ = deid_apply(ds, self.vault, Stage.SECONDARY)
                except DeidError as exc:
                    raise CurationError(f"secondary pseudonymisation failed for {path.name}: {exc}")
                modalities.add(out.text(T.MODALITY))
                linkage.append(
                    {
                        "client_s2": out.text(T.PATIENT_ID),
                        "study_s2": out.text(T.STUDY_INSTANCE_UID),
                        "series_s2": out.text(T.SERIES_INSTANCE_UID),
                        "image_s2": out.text(T.SOP_INSTANCE_UID),
                    }
                )
                images.append((out.text(T.SOP_INSTANCE_UID), serialize_dataset(out)))
        if not images:
            raise CurationError("study contains no images")
        record_path = study_dir / "clinical.json"
        clinical = json.loads(record_path.read_text()) if record_path.exists() else {}
        client_s2 = record.pseudonym
        filtered = filter_clinical_record(clinical, self.whitelist, client_s2)
        return {
            "client_s2": client_s2,
            "study_s2": linkage[0]["study_s2"],
            "images": images,
            "linkage": linkage,
            "record": filtered,
            "modalities": sorted(modalities),
        }

    def _flag_suspects(self, ds: DataSet, path: Path, flagged: list[dict]) -> None:
        finding = _burn_in_suspect(ds)
        if finding:
            flagged.append({"kind": "burn-in-suspect", "file": str(path), "detail": finding})

    @staticmethod
    def _is_disguised_scan(ds: DataSet) -> bool:
        modality = ds.text(T.MODALITY).upper()
        image_type = ds.text(T.IMAGE_TYPE).upper()
        if modality in ("SC", "OT"):
            return True
        return "DERIVED" in image_type and "SECONDARY" in image_type

    def _publish_study(self, bundle: dict) -> bool:
        final = self.published_dir / bundle["client_s2"] / bundle["study_s2"]
        if final.exists():
            return False
        tmp = self.published_dir / f".tmp-{bundle['study_s2']}"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        for image_uid, payload in bundle["images"]:
            (tmp / f"{image_uid}.dcm").write_bytes(payload)
        (tmp / "clinical.json").write_text(json.dumps(bundle["record"], indent=1, sort_keys=True))
        final.parent.mkdir(parents=True, exist_ok=True)
        os.replace(tmp, final)
        index = self._load_json(self._index_path, {})
        index.setdefault(bundle["client_s2"], {})[bundle["study_s2"]] = {
            "modalities": bundle["modalities"],
            "images": [uid for uid, _ in bundle["images"]],
        }
        self._save_json(self._index_path, index)
        return True

    def _quarantine_study(self, study_dir: Path, reason: str) -> None:
        dest = self.quarantine_dir / study_dir.name
        if dest.exists():
            shutil.rmtree(dest)
        shutil.copytree(study_dir, dest)
        (dest / "reason.txt").write_text(reason)

    def _persist_manifest(self, manifest: CurationManifest) -> None:
        self._save_json(self.state_dir / "manifests" / f"{manifest.batch_id}.json", manifest.as_dict())

    # -- linkage file ------------------------------------------------------

    def _rebuild_linkage_file(self) -> None:
        rows = []
        for client_dir in sorted(p for p in self.published_dir.iterdir() if p.is_dir()):
            for study_dir in sorted(p for p in client_dir.iterdir() if p.is_dir()):
                for image in sorted(study_dir.glob("*.dcm")):
                    ds = parse_dataset(image.read_bytes())
                    rows.append(
                        [
                            ds.text(T.PATIENT_ID),
                            ds.text(T.STUDY_INSTANCE_UID),
                            ds.text(T.SERIES_INSTANCE_UID),
                            ds.text(T.SOP_INSTANCE_UID),
                        ]
                    )
        tmp = self.published_dir / ".linkage.tmp"
        with open(tmp, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(LINKAGE_HEADER)
            writer.writerows(rows)
        os.replace(tmp, self.published_dir / "linkage.csv")

    def linkage_rows(self) -> list[dict]:
        path = self.published_dir / "linkage.csv"
        if not path.exists():
            return []
        with open(path, newline="") as f:
            return list(csv.DictReader(f))

    # -- published scanning -------------------------------------------------

    def scan_published(self, tree: str | Path | None = None) -> list[dict]:
        """Independent checks over a published tree; returns findings."""
        tree = Path(tree) if tree is not None else self.published_dir
        findings: list[dict] = []
        for image in sorted(tree.rglob("*.dcm")):
            try:
                ds = parse_dataset(image.read_bytes())
            except DicomCodecError as exc:
                findings.append({"kind": "unparseable", "file": str(image), "detail": str(exc)})
                continue
            burn = _burn_in_suspect(ds)
            if burn:
                findings.append({"kind": "burn-in-suspect", "file": str(image), "detail": burn})
            if self._is_disguised_scan(ds):
                findings.append({"kind": "digitised-scan", "file": str(image), "detail": "SC/derived header"})
            findings.extend(_header_identifier_findings(ds, str(image)))
        for record in sorted(tree.rglob("clinical.json")):
            findings.extend(_text_identifier_findings(record.read_text(), str(record)))
        return findings

    # -- cascade -----------------------------------------------------------

    def cascade_stage1(self, s1_pseudonym: str) -> CascadeReport:
        """Remove published/exported artifacts for a cascaded stage-1 client."""
        report = self.vault.record_opt_out(s1_pseudonym, source="local-request").cascade_report
        index = self._load_json(self._index_path, {})
        # The index is keyed by stage-2 pseudonym, which the vault no longer
        # knows; prune entries whose directories vanished.
        index = {c: s for c, s in index.items() if (self.published_dir / c).exists()}
        self._save_json(self._index_path, index)
        self._rebuild_linkage_file()
        return report or CascadeReport()

    # -- subset export --------------------------------------------------------

    def export_subset(self, criteria: ExportCriteria, destination: str | Path, licensee_id: str) -> ExportReport:
        if licensee_id not in self.licensees():
            raise UnknownLicensee(licensee_id)
        destination = Path(destination)
        destination.mkdir(parents=True, exist_ok=True)
        index = self._load_json(self._index_path, {})

        selected: dict[str, list[str]] = {}
        for client_s2 in sorted(index):
            studies = []
            for study_s2, meta in sorted(index[client_s2].items()):
                if criteria.modalities and not (set(meta.get("modalities", [])) & criteria.modalities):
                    continue
                if criteria.outcomes and not self._outcomes_match(client_s2, study_s2, criteria.outcomes):
                    continue
                studies.append(study_s2)
            if studies:
                selected[client_s2] = studies
            if criteria.max_clients is not None and len(selected) >= criteria.max_clients:
                break

        report = ExportReport(licensee=licensee_id)
        exported_files: list[dict] = []
        linkage_subset = []
        all_rows = self.linkage_rows()
        for client_s2, studies in selected.items():
            report.clients += 1
            for study_s2 in studies:
                src = self.published_dir / client_s2 / study_s2
                dest = destination / client_s2 / study_s2
                if not dest.exists():
                    dest.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copytree(src, dest)
                report.studies += 1
                for path in sorted(dest.rglob("*")):
                    if path.is_file():
                        report.files += 1
                        report.bytes += path.stat().st_size
                        exported_files.append(
                            {"path": str(path.relative_to(destination)), "sha256": _sha256(path)}
                        )
                linkage_subset.extend(
                    row for row in all_rows if row["client_s2"] == client_s2 and row["study_s2"] == study_s2
                )
        if linkage_subset:
            with open(destination / "linkage.csv", "w", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=LINKAGE_HEADER)
                writer.writeheader()
                writer.writerows(linkage_subset)
        report.empty = report.studies == 0

        audit_row = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "licensee": licensee_id,
            "criteria": {
                "outcomes": sorted(criteria.outcomes),
                "modalities": sorted(criteria.modalities),
                "max_clients": criteria.max_clients,
            },
            "destination": str(destination),
            "clients": report.clients,
            "studies": report.studies,
            "empty": report.empty,
            "files": exported_files,
        }
        with open(self._audit_path, "a") as f:
            f.write(json.dumps(audit_row) + "\n")

        destinations = self._load_json(self._exports_path, [])
        if str(destination) not in destinations:
            destinations.append(str(destination))
            self._save_json(self._exports_path, destinations)
        self.vault.register_artifact_root("published", destination)
        return report

    def _outcomes_match(self, client_s2: str, study_s2: str, outcomes: set) -> bool:
        record_path = self.published_dir / client_s2 / study_s2 / "clinical.json"
        if not record_path.exists():
            return False
        record = json.loads(record_path.read_text())
        found = {ep.get("outcome") for ep in record.get("episodes", [])}
        return bool(found & outcomes)

    def audit_rows(self) -> list[dict]:
        if not self._audit_path.exists():
            return []
        return [json.loads(line) for line in self._audit_path.read_text().splitlines() if line]


def filter_clinical_record(record: dict, whitelist: set, stage2_pseudonym: str) -> dict:
    """Keep only whitelisted property paths; rewrite the pseudonym to stage 2."""
    out: dict = {"pseudonym": stage2_pseudonym}
    grouped: dict[str, set] = {}
    for path in whitelist:
        top, _, sub = path.partition(".")
        grouped.setdefault(top, set())
        if sub:
            grouped[top].add(sub)
    for top, subs in grouped.items():
        if top == "pseudonym" or top not in record:
            continue
        value = record[top]
        if not subs:
            out[top] = value
        elif isinstance(value, list):
            out[top] = [
                {k: item[k] for k in sorted(subs) if isinstance(item, dict) and k in item}
                for item in value
            ]
        elif isinstance(value, dict):
            out[top] = {k: value[k] for k in sorted(subs) if k in value}
    return out


def _burn_in_suspect(ds: DataSet) -> str | None:
    """High-intensity block in the top band suggests burnt-in text."""
    pixel = ds.get(T.PIXEL_DATA)
    rows_el, cols_el, bits_el = ds.get(T.ROWS), ds.get(T.COLUMNS), ds.get(T.BITS_ALLOCATED)
    if pixel is None or rows_el is None or cols_el is None or bits_el is None:
        return None
    if not (rows_el.value and cols_el.value and bits_el.value):
        return None
    rows, cols, bits = rows_el.value[0], cols_el.value[0], bits_el.value[0]
    if bits != 8 or not pixel.value or rows * cols != len(pixel.value):
        return None
    band_rows = min(8, rows)
    band = pixel.value[: band_rows * cols]
    if not band:
        return None
    bright = sum(1 for b in band if b >= 0xF0)
    fraction = bright / len(band)
    if fraction > 0.3:
        return f"{fraction:.0%} of the top band at saturation"
    return None


def _header_identifier_findings(ds: DataSet, file_name: str) -> list[dict]:
    from ..dicom.model import iter_elements

    findings = []
    for el in iter_elements(ds):
        if not isinstance(el.value, str) or not el.value:
            continue
        findings.extend(
            {"kind": "national-id-pattern", "file": file_name, "tag": str(el.tag), "detail": match}
            for match in _valid_national_ids_in(el.value)
        )
        if el.vr == "PN" and _person_name_shaped(el.value):
            findings.append(
                {"kind": "person-name", "file": file_name, "tag": str(el.tag), "detail": el.value}
            )
    return findings


def _text_identifier_findings(text: str, file_name: str) -> list[dict]:
    return [
        {"kind": "national-id-pattern", "file": file_name, "detail": match}
        for match in _valid_national_ids_in(text)
    ]


def _valid_national_ids_in(text: str) -> list[str]:
    return [
        m.group()
        for m in re.finditer(r"(?<!\d)\d{10}(?!\d)", text)
        if validate_national_id(m.group())
    ]


def _person_name_shaped(value: str) -> bool:
    if "^" not in value:
        return False
    parts = [p for p in value.split("^") if p]
    return len(parts) >= 2 and all(any(c.isalpha() for c in p) for p in parts) and value != "ANON"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
