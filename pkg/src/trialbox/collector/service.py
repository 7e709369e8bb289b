"""The on-site collection orchestrator.

Drives the full site-side flow: identify new cases from the clinical feed,
exclude opt-outs, register clients in the vault, pull images from the
archive, de-identify, stage alongside the client's clinical record, and
push staged studies to the trial endpoint on the nightly transfer. Every
staged study lands via an atomic directory rename and all bookkeeping is
keyed by a hash of the original study UID, so a crashed run converges to
the same result when re-run.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import shutil
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, time as dtime, timedelta
from pathlib import Path

from ..deid import (
    PolicyGap,
    Rect,
    Stage,
    UnregisteredClient,
    apply as deid_apply,
    builtin_policy,
    compose_policy,
    load_overlay,
    mask_burn_in,
)
from ..deid.engine import DeidError
from ..dicom import DataSet, parse_dataset, serialize_dataset
from ..dicom.codec import DicomCodecError
from ..dicom import tags as T
from ..sim.client import ClinicalClient, PacsClient, PacsUnreachable
from ..vault import OptedOut, Vault, VaultSecrets
from .receiver import Receiver
from .state import CaseState


class CollectorError(Exception):
    pass


class CycleInProgress(CollectorError):
    pass


class EndpointUnavailable(CollectorError):
    pass


class _Quarantine(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class SelectionCriteria:
    include_outcomes: set = field(
        default_factory=lambda: {"normal", "recall", "biopsy-benign", "biopsy-malignant", "pending"}
    )
    normals_sample_rate: float = 1.0
    modalities: set = field(default_factory=set)  # empty = all
    since: str = ""

    def __post_init__(self):
        self.include_outcomes = set(self.include_outcomes)
        self.modalities = set(self.modalities)
        if not 0.0 <= self.normals_sample_rate <= 1.0:
            raise ValueError("normals_sample_rate must be within [0, 1]")

    @classmethod
    def from_file(cls, path: str | Path) -> "SelectionCriteria":
        raw = json.loads(Path(path).read_text())
        return cls(
            include_outcomes=set(raw.get("include_outcomes", [])),
            normals_sample_rate=raw.get("normals_sample_rate", 1.0),
            modalities=set(raw.get("modalities", [])),
            since=raw.get("since", ""),
        )


@dataclass
class CycleReport:
    identified: int = 0
    excluded_opt_out: int = 0
    retrieved: int = 0
    deidentified: int = 0
    staged: int = 0
    quarantined: int = 0
    file_errors: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class TransferReport:
    studies_pushed: int = 0
    bytes: int = 0
    local_deleted: int = 0
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class UpdateReport:
    episodes_updated: int = 0
    revisions_applied: int = 0
    new_studies_collected: int = 0

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class CollectorConfig:
    work_dir: Path
    endpoint_dir: Path
    pacs_address: tuple[str, int] = ("127.0.0.1", 11112)
    clinical_address: tuple[str, int] = ("127.0.0.1", 11113)
    receiver_host: str = "127.0.0.1"
    receiver_port: int = 0
    site_prefix: str = "S01"
    trial_prefix: str = "TRIAL"
    burn_in_regions: dict = field(default_factory=dict)  # station -> list[Rect]
    burn_in_prone_stations: set = field(default_factory=set)
    demographics_whitelist: set = field(default_factory=set)
    transfer_window: tuple[str, str] | None = None  # ("22:00", "06:00")
    deid_overlay: Path | None = None  # site additions; remove/anonymise only

    def __post_init__(self):
        self.work_dir = Path(self.work_dir)
        self.endpoint_dir = Path(self.endpoint_dir)

    @classmethod
    def from_file(cls, path: str | Path) -> "CollectorConfig":
        raw = json.loads(Path(path).read_text())
        regions = {
            station: [Rect(**r) for r in rects]
            for station, rects in raw.get("burn_in_regions", {}).items()
        }
        return cls(
            work_dir=Path(raw["work_dir"]),
            endpoint_dir=Path(raw["endpoint_dir"]),
            pacs_address=(raw.get("pacs_host", "127.0.0.1"), raw.get("pacs_port", 11112)),
            clinical_address=(raw.get("clinical_host", "127.0.0.1"), raw.get("clinical_port", 11113)),
            receiver_host=raw.get("receiver_host", "127.0.0.1"),
            receiver_port=raw.get("receiver_port", 0),
            site_prefix=raw.get("site_prefix", "S01"),
            trial_prefix=raw.get("trial_prefix", "TRIAL"),
            burn_in_regions=regions,
            burn_in_prone_stations=set(raw.get("burn_in_prone_stations", regions.keys())),
            demographics_whitelist=set(raw.get("demographics_whitelist", [])),
            transfer_window=tuple(raw["transfer_window"]) if raw.get("transfer_window") else None,
            deid_overlay=Path(raw["deid_overlay"]) if raw.get("deid_overlay") else None,
        )


class Collector:
    def __init__(
        self,
        config: CollectorConfig,
        secrets: VaultSecrets | None = None,
        fault_hook=None,
    ):
        self.config = config
        self.work_dir = config.work_dir
        self.work_dir.mkdir(parents=True, exist_ok=True)
        self.staging_dir = self.work_dir / "staging"
        self.incoming_dir = self.work_dir / "incoming"
        self.quarantine_dir = self.work_dir / "quarantine"
        for directory in (self.staging_dir, self.incoming_dir, self.quarantine_dir):
            directory.mkdir(parents=True, exist_ok=True)
        secrets = secrets or VaultSecrets.from_env()
        self.vault = Vault(
            self.work_dir / "vault.bin",
            secrets,
            site_prefix=config.site_prefix,
            uid_scope="stage1",
        )
        self.vault.register_artifact_root("staged", self.staging_dir)
        self.vault.register_artifact_root("published", config.endpoint_dir)
        self._trial_code_key = secrets.trial_salt.encode("utf-8")
        self._policy = builtin_policy()
        if config.deid_overlay is not None:
            self._policy = compose_policy(self._policy, load_overlay(config.deid_overlay))
        self.state = CaseState(self.work_dir / "state.json")
        self.pacs = PacsClient(config.pacs_address)
        self.clinical = ClinicalClient(config.clinical_address)
        self.receiver = Receiver(self.incoming_dir, config.receiver_host, config.receiver_port)
        self.fault_hook = fault_hook
        self._cycle_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------

    def start(self) -> None:
        self.receiver.start()

    def stop(self) -> None:
        self.receiver.stop()

    def __enter__(self) -> "Collector":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def receiver_address(self) -> tuple[str, int]:
        return self.receiver.address

    def _fault(self, point: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(point)

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def _case_key(study_uid: str) -> str:
        return hashlib.sha256(study_uid.encode("utf-8")).hexdigest()[:24]

    def _trial_code_for(self, national_id: str) -> str:
        digest = hmac.new(self._trial_code_key, national_id.encode("utf-8"), hashlib.sha256)
        return f"{self.config.trial_prefix}-{digest.hexdigest()[:10].upper()}"

    def _episode_internal_id(self, episode_id: str) -> str:
        digest = hmac.new(self._trial_code_key, episode_id.encode("utf-8"), hashlib.sha256)
        return f"EPI-{digest.hexdigest()[:12].upper()}"

    def _normals_gate(self, pseudonym: str, rate: float) -> bool:
        if rate >= 1.0:
            return True
        if rate <= 0.0:
            return False
        digest = hashlib.sha256(pseudonym.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") / 2**32 < rate

    def _cleanup_tmp(self) -> None:
        for leftover in self.staging_dir.glob(".tmp-*"):
            shutil.rmtree(leftover, ignore_errors=True)

    # -- collection cycle ----------------------------------------------------

    def run_collection_cycle(self, criteria: SelectionCriteria | None = None) -> CycleReport:
        if not self._cycle_lock.acquire(blocking=False):
            raise CycleInProgress("a collection cycle is already running")
        try:
            criteria = criteria or SelectionCriteria()
            self._cleanup_tmp()
            report = CycleReport()
            episodes = self.clinical.new_cases(criteria.since)
            for episode in episodes:
                if episode.outcome not in criteria.include_outcomes:
                    continue
                report.identified += 1
                if self.vault.is_opted_out(episode.national_id):
                    report.excluded_opt_out += 1
                    continue
                record = self.vault.find_by_national_id(episode.national_id)
                if record is None:
                    record = self.vault.register_client(
                        episode.national_id,
                        episode.local_id,
                        self._trial_code_for(episode.national_id),
                    )
                if episode.outcome == "normal" and not self._normals_gate(
                    record.pseudonym, criteria.normals_sample_rate
                ):
                    continue
                self.state.upsert_client(record.pseudonym, local_id=episode.local_id)
                self.state.upsert_episode(
                    episode.episode_id,
                    pseudonym=record.pseudonym,
                    internal_id=self._episode_internal_id(episode.episode_id),
                    outcome=episode.outcome,
                    outcome_date=episode.outcome_date,
                    revised_from=episode.revised_from,
                )
                for descriptor in self.pacs.find({"local_id": episode.local_id}):
                    if criteria.modalities and descriptor["modality"] not in criteria.modalities:
                        continue
                    self._collect_study(descriptor, record, episode.episode_id, report)
            self.state.mark_cycle_finished()
            return report
        finally:
            self._cycle_lock.release()

    def _collect_study(self, descriptor: dict, record, episode_id: str, report: CycleReport) -> None:
        study_uid = descriptor["study_uid"]
        case_key = self._case_key(study_uid)
        case = self.state.case(case_key)
        if case and case.get("status") in ("staged", "transferred", "quarantined", "deleted"):
            return
        self.state.upsert_case(
            case_key, status="identified", pseudonym=record.pseudonym, episode_id=episode_id
        )
        self.pacs.retrieve(study_uid)
        self.state.upsert_case(case_key, status="retrieved")
        report.retrieved += 1
        self._fault("after-retrieve")
        try:
            self._deidentify_and_stage(study_uid, case_key, record, report)
        except _Quarantine as q:
            self._quarantine(study_uid, case_key, q.reason, report)

    def _deidentify_and_stage(self, study_uid: str, case_key: str, record, report: CycleReport) -> None:
        incoming = self.incoming_dir / study_uid
        files = sorted(incoming.glob("*.dcm")) if incoming.is_dir() else []
        if not files:
            raise _Quarantine("retrieve delivered no files")
        outputs: list[tuple[str, bytes, DataSet]] = []
        demographics: dict = {}
        with self.vault.deferred_flush():
            for path in files:
                try:
                    ds = parse_dataset(path.read_bytes())
                except DicomCodecError as exc:
                    raise _Quarantine(f"unparseable image {path.name}: {exc}")
                self._capture_demographics(ds, demographics)
                ds = self._apply_burn_in_policy(ds)
                try:
                    out, _ = deid_apply(ds, self.vault, Stage.PRIMARY, self._policy)
                except PolicyGap as exc:
                    raise _Quarantine(f"unpoliced identifier tags: {exc.tags}")
                except UnregisteredClient as exc:
                    raise _Quarantine(str(exc))
                except DeidError as exc:
                    raise _Quarantine(f"de-identification failed: {exc}")
                image_uid = out.text(T.SOP_INSTANCE_UID)
                outputs.append((image_uid, serialize_dataset(out), out))
        self.state.upsert_case(case_key, status="deidentified")
        report.deidentified += 1
        self._fault("after-deid")

        remapped_study = outputs[0][2].text(T.STUDY_INSTANCE_UID)
        tmp = self.staging_dir / f".tmp-{remapped_study}"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        for image_uid, payload, _ in outputs:
            (tmp / f"{image_uid}.dcm").write_bytes(payload)
        self._write_clinical_record(tmp / "clinical.json", record.pseudonym, demographics)
        self._fault("before-stage-rename")
        final = self.staging_dir / record.pseudonym / remapped_study
        final.parent.mkdir(parents=True, exist_ok=True)
        if final.exists():
            shutil.rmtree(tmp)  # an earlier run already staged this study
        else:
            os.replace(tmp, final)
        self._fault("after-stage-rename")
        self.state.upsert_case(
            case_key,
            status="staged",
            remapped_study_uid=remapped_study,
            images=[uid for uid, _, _ in outputs],
        )
        shutil.rmtree(incoming, ignore_errors=True)
        report.staged += 1

    def _capture_demographics(self, ds: DataSet, demographics: dict) -> None:
        birth = ds.text(T.PATIENT_BIRTH_DATE)
        if len(birth) >= 4 and birth[:4].isdigit():
            demographics["birth_year"] = int(birth[:4])
        sex = ds.text(T.PATIENT_SEX)
        if sex:
            demographics["sex"] = sex

    def _apply_burn_in_policy(self, ds: DataSet) -> DataSet:
        station = ds.text(T.STATION_NAME)
        if station not in self.config.burn_in_prone_stations:
            return ds
        regions = self.config.burn_in_regions.get(station)
        if not regions:
            raise _Quarantine(f"burn-in-prone station {station!r} has no configured regions")
        if ds.get(T.PIXEL_DATA) is None:
            return ds
        masked_ds, _ = mask_burn_in(ds, regions)
        return masked_ds

    def _write_clinical_record(self, path: Path, pseudonym: str, demographics: dict) -> None:
        record = self.build_clinical_record(pseudonym, demographics)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, indent=1, sort_keys=True))
        os.replace(tmp, path)

    def build_clinical_record(self, pseudonym: str, demographics: dict | None = None) -> dict:
        offset_days = self.vault.date_offset_for(pseudonym)
        episodes = []
        for episode_id, info in sorted(self.state.episodes().items()):
            if info.get("pseudonym") != pseudonym:
                continue
            episodes.append(
                {
                    "episode_id_internal": info["internal_id"],
                    "outcome": info.get("outcome"),
                    "outcome_date": _offset_iso(info.get("outcome_date"), offset_days),
                    "revised_from": info.get("revised_from"),
                }
            )
        allowed = {}
        for key in sorted(self.config.demographics_whitelist):
            if demographics and key in demographics:
                allowed[key] = demographics[key]
            else:
                client = self.state.client(pseudonym) or {}
                if key in client.get("demographics", {}):
                    allowed[key] = client["demographics"][key]
        if demographics:
            self.state.upsert_client(pseudonym, demographics=demographics)
        return {"pseudonym": pseudonym, "episodes": episodes, "demographics_allowed": allowed}

    def _quarantine(self, study_uid: str, case_key: str, reason: str, report: CycleReport) -> None:
        dest = self.quarantine_dir / study_uid
        incoming = self.incoming_dir / study_uid
        dest.mkdir(parents=True, exist_ok=True)
        if incoming.is_dir():
            for path in incoming.iterdir():
                os.replace(path, dest / path.name)
            shutil.rmtree(incoming, ignore_errors=True)
        (dest / "reason.txt").write_text(reason)
        self.state.upsert_case(case_key, status="quarantined", quarantine_reason=reason)
        report.quarantined += 1

    # -- ground truth refresh --------------------------------------------------

    def refresh_ground_truth(self) -> UpdateReport:
        report = UpdateReport()
        tracked = self.state.episodes()
        if tracked:
            for row in self.clinical.outcomes(list(tracked.keys())):
                known = tracked.get(row.episode_id)
                if known is None:
                    continue
                if row.outcome != known.get("outcome") or (row.revised_from or None) != known.get("revised_from"):
                    self.state.upsert_episode(
                        row.episode_id,
                        outcome=row.outcome,
                        outcome_date=row.outcome_date,
                        revised_from=row.revised_from,
                    )
                    report.episodes_updated += 1
                    if row.revised_from:
                        report.revisions_applied += 1
                    self._rewrite_clinical_records(known["pseudonym"])
        report.new_studies_collected = self._collect_new_studies_for_known_clients()
        return report

    def _collect_new_studies_for_known_clients(self) -> int:
        collected = 0
        try:
            fresh = self.clinical.new_cases("")
        except PacsUnreachable:
            return 0
        known_clients = self.state.clients()
        local_to_pseudonym = {info["local_id"]: p for p, info in known_clients.items() if "local_id" in info}
        sub_report = CycleReport()
        for episode in fresh:
            pseudonym = local_to_pseudonym.get(episode.local_id)
            if pseudonym is None:
                continue
            record = self.vault.find_by_pseudonym(pseudonym)
            if record is None:
                continue  # cascaded away; never re-collect
            if self.state.episode(episode.episode_id) is None:
                self.state.upsert_episode(
                    episode.episode_id,
                    pseudonym=pseudonym,
                    internal_id=self._episode_internal_id(episode.episode_id),
                    outcome=episode.outcome,
                    outcome_date=episode.outcome_date,
                    revised_from=episode.revised_from,
                )
            before = sub_report.staged
            for descriptor in self.pacs.find({"local_id": episode.local_id}):
                self._collect_study(descriptor, record, episode.episode_id, sub_report)
            collected += sub_report.staged - before
        return collected

    def _rewrite_clinical_records(self, pseudonym: str) -> None:
        for case in self.state.cases().values():
            if case.get("pseudonym") != pseudonym:
                continue
            study = case.get("remapped_study_uid")
            if not study:
                continue
            if case.get("status") == "staged":
                base = self.staging_dir
            elif case.get("status") == "transferred":
                base = self.config.endpoint_dir
            else:
                continue
            target = base / pseudonym / study / "clinical.json"
            if target.parent.is_dir():
                self._write_clinical_record(target, pseudonym, None)

    # -- nightly transfer ---------------------------------------------------------

    def transfer_nightly(self, force: bool = False) -> TransferReport:
        report = TransferReport()
        if not force and not self._window_open():
            return report
        endpoint = self.config.endpoint_dir
        try:
            endpoint.mkdir(parents=True, exist_ok=True)
            probe = endpoint / ".write-probe"
            probe.write_text("ok")
            probe.unlink()
        except OSError as exc:
            raise EndpointUnavailable(f"endpoint not writable: {exc}") from exc

        for leftover in endpoint.glob(".part-*"):
            shutil.rmtree(leftover, ignore_errors=True)

        for client_dir in sorted(p for p in self.staging_dir.iterdir() if p.is_dir()):
            for study_dir in sorted(p for p in client_dir.iterdir() if p.is_dir()):
                self._transfer_study(client_dir.name, study_dir, report)
            if not any(client_dir.iterdir()):
                client_dir.rmdir()
        return report

    def _transfer_study(self, pseudonym: str, study_dir: Path, report: TransferReport) -> None:
        endpoint = self.config.endpoint_dir
        dest = endpoint / pseudonym / study_dir.name
        if dest.exists():
            # Pushed by an earlier interrupted run; just finish the local delete.
            shutil.rmtree(study_dir)
            report.local_deleted += 1
            self._mark_transferred(study_dir.name)
            return
        tmp = endpoint / f".part-{study_dir.name}"
        shutil.copytree(study_dir, tmp)
        self._fault("transfer-after-copy")
        if not _trees_match(study_dir, tmp):
            shutil.rmtree(tmp)
            report.failures.append({"study": study_dir.name, "reason": "checksum-mismatch"})
            return
        self._fault("transfer-before-rename")
        dest.parent.mkdir(parents=True, exist_ok=True)
        os.replace(tmp, dest)
        report.studies_pushed += 1
        report.bytes += sum(p.stat().st_size for p in dest.rglob("*") if p.is_file())
        self._mark_transferred(study_dir.name)
        self._fault("transfer-before-delete")
        shutil.rmtree(study_dir)
        report.local_deleted += 1

    def _mark_transferred(self, remapped_study_uid: str) -> None:
        for key, case in self.state.cases().items():
            if case.get("remapped_study_uid") == remapped_study_uid and case.get("status") == "staged":
                self.state.upsert_case(key, status="transferred")

    def _window_open(self) -> bool:
        window = self.config.transfer_window
        if window is None:
            return True
        start = dtime.fromisoformat(window[0])
        end = dtime.fromisoformat(window[1])
        now = datetime.now().time()
        if start <= end:
            return start <= now <= end
        return now >= start or now <= end

    # -- manual import ---------------------------------------------------------------

    def import_directory(self, path: str | Path, manifest: dict | str | Path) -> CycleReport:
        """Semi-automated intake: a directory of files plus a per-file manifest."""
        if not isinstance(manifest, dict):
            manifest = json.loads(Path(manifest).read_text())
        entries: dict = manifest.get("files", manifest)
        report = CycleReport()
        directory = Path(path)
        files = sorted(directory.glob("*.dcm"))
        present = {p.name for p in files}
        for name in sorted(entries):
            if name not in present:
                report.file_errors.append({"file": name, "reason": "manifest-entry-without-file"})
        grouped: dict[str, list[tuple[Path, DataSet, dict]]] = {}
        for file_path in files:
            entry = entries.get(file_path.name)
            if entry is None:
                report.file_errors.append({"file": file_path.name, "reason": "manifest-gap"})
                continue
            try:
                ds = parse_dataset(file_path.read_bytes())
            except DicomCodecError as exc:
                report.file_errors.append({"file": file_path.name, "reason": f"parse-failure: {exc}"})
                continue
            header_local = ds.text(T.PATIENT_ID)
            if header_local != entry.get("local_id"):
                report.file_errors.append(
                    {"file": file_path.name, "reason": "manifest-local-id-mismatch"}
                )
                continue
            study_uid = ds.text(T.STUDY_INSTANCE_UID)
            grouped.setdefault(study_uid, []).append((file_path, ds, entry))
        for study_uid, members in sorted(grouped.items()):
            self._import_study(study_uid, members, report)
        return report

    def _import_study(self, study_uid: str, members: list, report: CycleReport) -> None:
        _, first_ds, entry = members[0]
        national_id = entry.get("national_id")
        local_id = entry["local_id"]
        report.identified += 1
        if national_id:
            if self.vault.is_opted_out(national_id):
                report.excluded_opt_out += 1
                return
            record = self.vault.find_by_national_id(national_id)
            if record is None:
                try:
                    record = self.vault.register_client(
                        national_id, local_id, self._trial_code_for(national_id)
                    )
                except OptedOut:
                    report.excluded_opt_out += 1
                    return
        else:
            record = self.vault.find_by_local_id(local_id)
        if record is None:
            for file_path, _, _ in members:
                report.file_errors.append({"file": file_path.name, "reason": "unregistered-client"})
            return
        case_key = self._case_key(study_uid)
        case = self.state.case(case_key)
        if case and case.get("status") in ("staged", "transferred", "quarantined", "deleted"):
            return
        self.state.upsert_client(record.pseudonym, local_id=local_id)
        self.state.upsert_case(case_key, status="identified", pseudonym=record.pseudonym,
                               episode_id=entry.get("episode_id", ""))
        incoming = self.incoming_dir / study_uid
        incoming.mkdir(parents=True, exist_ok=True)
        for file_path, _, _ in members:
            shutil.copy2(file_path, incoming / file_path.name)
        self.state.upsert_case(case_key, status="retrieved")
        report.retrieved += 1
        try:
            self._deidentify_and_stage(study_uid, case_key, record, report)
        except _Quarantine as q:
            self._quarantine(study_uid, case_key, q.reason, report)

    # -- opt-out ------------------------------------------------------------------------

    def opt_out(self, national_id: str, source: str = "local-request"):
        """Record an opt-out and cascade away anything already collected."""
        record = self.vault.find_by_national_id(national_id)
        entry = self.vault.record_opt_out(national_id, source=source)
        if record is not None:
            self.state.delete_cases_for(record.pseudonym)
        return entry

    # -- status (for the admin surface) ---------------------------------------------------

    def status_summary(self) -> dict:
        cases = self.state.cases()
        by_status: dict[str, int] = {}
        for case in cases.values():
            by_status[case.get("status", "unknown")] = by_status.get(case.get("status", "unknown"), 0) + 1
        return {
            "cases": len(cases),
            "by_status": by_status,
            "clients": len(self.state.clients()),
            "last_cycle_at": self.state.last_cycle_at,
        }


def _offset_iso(iso_date: str | None, offset_days: int) -> str | None:
    if not iso_date:
        return iso_date
    try:
        original = date.fromisoformat(iso_date)
    except ValueError:
        return None
    return (original + timedelta(days=offset_days)).isoformat()


def _trees_match(src: Path, dst: Path) -> bool:
    src_files = sorted(p.relative_to(src) for p in src.rglob("*") if p.is_file())
    dst_files = sorted(p.relative_to(dst) for p in dst.rglob("*") if p.is_file())
    if src_files != dst_files:
        return False
    for rel in src_files:
        if _sha256(src / rel) != _sha256(dst / rel):
            return False
    return True


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
