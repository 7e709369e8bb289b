"""Encrypted site-local pseudonym vault.

One vault file holds the client registry (pseudonym, AES-encrypted national
ID, salted hashes for matching), the UID remapping table and the opt-out
list. The whole store is encrypted at rest; every mutation is serialized
through a single lock and flushed atomically (write-temp + rename), so
pseudonym counters survive crashes without ever repeating.

Plain national and local IDs are never persisted or returned: matching is
done on keyed hashes, and the recoverable AES copy of the national ID can
only be opened through the audit operation, which requires the separate
audit credential.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
import re
import shutil
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..nhs import validate_national_id

DEFAULT_UID_ROOT = "1.2.826.0.1.3680043.999."

_UID_RE = re.compile(r"^[0-9]+(\.[0-9]+)*$")
_FILE_MAGIC = b"TBV1"


class VaultError(Exception):
    pass


class InvalidNationalId(VaultError):
    pass


class MissingTrialCode(VaultError):
    pass


class DuplicateTrialCode(VaultError):
    pass


class AlreadyRegistered(VaultError):
    pass


class OptedOut(VaultError):
    pass


class MalformedUid(VaultError):
    pass


class AuditDenied(VaultError):
    pass


@dataclass(frozen=True)
class VaultSecrets:
    """Key material, normally supplied through the environment."""

    vault_key: str
    aes_key: str
    hash_salt: str
    trial_salt: str
    audit_key: str

    ENV_VARS = (
        "TRIALBOX_VAULT_KEY",
        "TRIALBOX_AES_KEY",
        "TRIALBOX_HASH_SALT",
        "TRIALBOX_TRIAL_SALT",
        "TRIALBOX_AUDIT_KEY",
    )

    @classmethod
    def from_env(cls) -> "VaultSecrets":
        values = []
        for name in cls.ENV_VARS:
            value = os.environ.get(name)
            if not value:
                raise VaultError(f"missing required secret {name}")
            values.append(value)
        return cls(*values)


@dataclass(frozen=True)
class PseudonymRecord:
    pseudonym: str
    encrypted_national_id: bytes
    local_id_hash: bytes
    national_id_hash: bytes
    date_offset_days: int
    created_at: str
    trial_code: str
    opted_out: bool = False


@dataclass(frozen=True)
class UidMapping:
    original_uid_hash: bytes
    replacement_uid: str
    scope: str  # stage1 | stage2
    owner: str  # pseudonym the mapping belongs to, for cascade removal


@dataclass(frozen=True)
class OptOutEntry:
    national_id_hash: bytes
    source: str  # national-list | local-request
    recorded_at: str
    cascade_report: "CascadeReport | None" = None


@dataclass
class CascadeReport:
    vault_rows_removed: int = 0
    staged_studies_removed: int = 0
    published_studies_removed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _derive_key(secret: str, purpose: bytes, salt: bytes = b"") -> bytes:
    hkdf = HKDF(algorithm=hashes.SHA256(), length=32, salt=salt or None, info=purpose)
    return hkdf.derive(secret.encode("utf-8"))


class Vault:
    """Single-writer pseudonym vault backed by one encrypted file."""

    def __init__(
        self,
        path: str | Path,
        secrets: VaultSecrets,
        site_prefix: str = "S01",
        uid_root: str = DEFAULT_UID_ROOT,
        uid_scope: str = "stage1",
        include_site_prefix: bool = True,
        validate_ids: bool = True,
    ):
        self.path = Path(path)
        self.site_prefix = site_prefix
        self.uid_root = uid_root
        self.uid_scope = uid_scope
        self.include_site_prefix = include_site_prefix
        # Stage-2 vaults key their clients by stage-1 pseudonyms, which are
        # not checksummed national IDs.
        self.validate_ids = validate_ids
        self._secrets = secrets
        self._store_key = _derive_key(secrets.vault_key, b"vault-store")
        self._hash_key = _derive_key(secrets.hash_salt, b"id-match")
        self._aes_key = _derive_key(secrets.aes_key, b"national-id", salt=secrets.trial_salt.encode("utf-8"))
        self._lock = threading.RLock()
        self._artifact_roots: dict[str, list[Path]] = {"staged": [], "published": []}
        self._defer_depth = 0
        self._dirty = False
        self._state = self._load()

    # -- persistence -------------------------------------------------

    def _load(self) -> dict:
        if not self.path.exists():
            return {
                "counter": 0,
                "uid_counter": 0,
                "records": [],
                "uid_mappings": [],
                "opt_outs": [],
            }
        blob = self.path.read_bytes()
        if not blob.startswith(_FILE_MAGIC):
            raise VaultError(f"{self.path} is not a vault file")
        nonce, ciphertext = blob[4:16], blob[16:]
        plaintext = AESGCM(self._store_key).decrypt(nonce, ciphertext, None)
        return json.loads(plaintext)

    def _persist(self) -> None:
        with self._lock:
            if self._defer_depth > 0:
                self._dirty = True
                return
            self._persist_now()

    def _persist_now(self) -> None:
        plaintext = json.dumps(self._state).encode("utf-8")
        nonce = os.urandom(12)
        blob = _FILE_MAGIC + nonce + AESGCM(self._store_key).encrypt(nonce, plaintext, None)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, self.path)
        self._dirty = False

    @contextmanager
    def deferred_flush(self):
        """Batch many mutations into one at-rest write; flushes on exit."""
        with self._lock:
            self._defer_depth += 1
        try:
            yield self
        finally:
            with self._lock:
                self._defer_depth -= 1
                if self._defer_depth == 0 and self._dirty:
                    self._persist_now()

    # -- hashing / crypto --------------------------------------------

    def _match_hash(self, value: str) -> str:
        return hmac.new(self._hash_key, value.encode("utf-8"), hashlib.sha256).hexdigest()

    def _draw_date_offset(self, national_id: str) -> int:
        """Uniform in [-364, -1], fixed per client.

        Keyed-hash derivation (rather than an in-memory RNG) keeps the
        draw stable across process restarts, which crash recovery needs
        to converge on byte-identical staged output.
        """
        digest = hmac.new(self._hash_key, b"date-offset|" + national_id.encode("utf-8"),
                          hashlib.sha256).digest()
        return -(1 + int.from_bytes(digest[:4], "big") % 364)

    def _encrypt_national_id(self, national_id: str) -> str:
        nonce = os.urandom(12)
        ct = AESGCM(self._aes_key).encrypt(nonce, national_id.encode("utf-8"), None)
        return base64.b64encode(nonce + ct).decode("ascii")

    def audit_decrypt_national_id(self, pseudonym: str, audit_key: str) -> str:
        """Privileged recovery of a national ID; requires the audit credential."""
        if not hmac.compare_digest(audit_key, self._secrets.audit_key):
            raise AuditDenied("audit credential rejected")
        with self._lock:
            raw = self._find_record(pseudonym=pseudonym)
            if raw is None:
                raise VaultError(f"no record for pseudonym {pseudonym}")
            blob = base64.b64decode(raw["encrypted_national_id"])
        plaintext = AESGCM(self._aes_key).decrypt(blob[:12], blob[12:], None)
        return plaintext.decode("utf-8")

    # -- queries ------------------------------------------------------

    def _find_record(self, national_id_hash: str | None = None, pseudonym: str | None = None,
                     local_id_hash: str | None = None, trial_code: str | None = None) -> dict | None:
        for raw in self._state["records"]:
            if national_id_hash is not None and raw["national_id_hash"] == national_id_hash:
                return raw
            if pseudonym is not None and raw["pseudonym"] == pseudonym:
                return raw
            if local_id_hash is not None and raw["local_id_hash"] == local_id_hash:
                return raw
            if trial_code is not None and raw["trial_code"] == trial_code:
                return raw
        return None

    def _to_record(self, raw: dict) -> PseudonymRecord:
        return PseudonymRecord(
            pseudonym=raw["pseudonym"],
            encrypted_national_id=base64.b64decode(raw["encrypted_national_id"]),
            local_id_hash=bytes.fromhex(raw["local_id_hash"]),
            national_id_hash=bytes.fromhex(raw["national_id_hash"]),
            date_offset_days=raw["date_offset_days"],
            created_at=raw["created_at"],
            trial_code=raw["trial_code"],
            opted_out=raw["opted_out"],
        )

    def find_by_national_id(self, national_id: str) -> PseudonymRecord | None:
        with self._lock:
            raw = self._find_record(national_id_hash=self._match_hash(national_id))
            return self._to_record(raw) if raw else None

    def find_by_local_id(self, local_id: str) -> PseudonymRecord | None:
        with self._lock:
            raw = self._find_record(local_id_hash=self._match_hash(local_id))
            return self._to_record(raw) if raw else None

    def find_by_pseudonym(self, pseudonym: str) -> PseudonymRecord | None:
        with self._lock:
            raw = self._find_record(pseudonym=pseudonym)
            return self._to_record(raw) if raw else None

    def all_records(self) -> list[PseudonymRecord]:
        with self._lock:
            return [self._to_record(raw) for raw in self._state["records"]]

    def date_offset_for(self, pseudonym: str) -> int:
        record = self.find_by_pseudonym(pseudonym)
        if record is None:
            raise VaultError(f"no record for pseudonym {pseudonym}")
        return record.date_offset_days

    # -- registration --------------------------------------------------

    def register_client(self, national_id: str, local_id: str, trial_code: str) -> PseudonymRecord:
        """Register a client, assigning the next pseudonym and a date offset.

        Re-registering the same national ID with the same trial code returns
        the existing record; a different trial code is rejected.
        """
        if self.validate_ids:
            verdict = validate_national_id(national_id)
            if not verdict:
                raise InvalidNationalId(f"national id rejected: {verdict.reason}")
        with self._lock:
            nid_hash = self._match_hash(national_id)
            if self._is_opted_out_hash(nid_hash):
                raise OptedOut("client has opted out of collection")
            existing = self._find_record(national_id_hash=nid_hash)
            if existing is not None:
                if existing["trial_code"] == trial_code:
                    return self._to_record(existing)
                raise AlreadyRegistered("this client has already been registered")
            if not trial_code:
                raise MissingTrialCode("a trial code must be provided")
            if self._find_record(trial_code=trial_code) is not None:
                raise DuplicateTrialCode("no two clients can have the same trial code")
            self._state["counter"] += 1
            counter = self._state["counter"]
            if self.include_site_prefix and self.site_prefix:
                pseudonym = f"{self.site_prefix}-{counter:08d}"
            else:
                pseudonym = f"{counter:08d}"
            raw = {
                "pseudonym": pseudonym,
                "encrypted_national_id": self._encrypt_national_id(national_id),
                "local_id_hash": self._match_hash(local_id),
                "national_id_hash": nid_hash,
                "date_offset_days": self._draw_date_offset(national_id),
                "created_at": datetime.now(timezone.utc).isoformat(),
                "trial_code": trial_code,
                "opted_out": False,
            }
            self._state["records"].append(raw)
            self._persist()
            return self._to_record(raw)

    # -- UID remapping --------------------------------------------------

    def remap_uid(self, original: str, owner: str = "") -> str:
        """Stable, injective replacement UID under the configured org root."""
        if not original or len(original) > 64 or not _UID_RE.match(original):
            raise MalformedUid(f"not a UID: {original!r}")
        with self._lock:
            uid_hash = self._match_hash(original)
            for raw in self._state["uid_mappings"]:
                if raw["original_uid_hash"] == uid_hash:
                    return raw["replacement_uid"]
            scope_digit = "1" if self.uid_scope == "stage1" else "2"
            while True:
                self._state["uid_counter"] += 1
                replacement = f"{self.uid_root}{scope_digit}.{self._state['uid_counter']}"
                if replacement != original:
                    break
            self._state["uid_mappings"].append(
                {
                    "original_uid_hash": uid_hash,
                    "replacement_uid": replacement,
                    "scope": self.uid_scope,
                    "owner": owner,
                }
            )
            self._persist()
            return replacement

    def uid_mappings(self) -> list[UidMapping]:
        with self._lock:
            return [
                UidMapping(bytes.fromhex(raw["original_uid_hash"]), raw["replacement_uid"],
                           raw["scope"], raw["owner"])
                for raw in self._state["uid_mappings"]
            ]

    # -- opt-out and cascade ---------------------------------------------

    def _is_opted_out_hash(self, nid_hash: str) -> bool:
        return any(e["national_id_hash"] == nid_hash for e in self._state["opt_outs"])

    def is_opted_out(self, national_id: str) -> bool:
        with self._lock:
            return self._is_opted_out_hash(self._match_hash(national_id))

    def record_opt_out(self, national_id: str, source: str = "local-request") -> OptOutEntry:
        """Record an opt-out; cascades automatically when data was already collected."""
        if self.validate_ids:
            verdict = validate_national_id(national_id)
            if not verdict:
                raise InvalidNationalId(f"national id rejected: {verdict.reason}")
        with self._lock:
            nid_hash = self._match_hash(national_id)
            recorded_at = datetime.now(timezone.utc).isoformat()
            if not self._is_opted_out_hash(nid_hash):
                self._state["opt_outs"].append(
                    {"national_id_hash": nid_hash, "source": source, "recorded_at": recorded_at}
                )
                self._persist()
            report = None
            if self._find_record(national_id_hash=nid_hash) is not None:
                report = self.delete_cascade(national_id)
            return OptOutEntry(bytes.fromhex(nid_hash), source, recorded_at, report)

    def load_opt_out_list(self, path: str | Path, source: str = "national-list") -> int:
        """Ingest a newline-delimited file of national IDs; returns entries added."""
        added = 0
        for line in Path(path).read_text().splitlines():
            national_id = line.strip()
            if not national_id:
                continue
            if not self.is_opted_out(national_id):
                self.record_opt_out(national_id, source=source)
                added += 1
        return added

    def register_artifact_root(self, kind: str, path: str | Path) -> None:
        """Register a directory tree (staged or published) for cascade cleanup."""
        if kind not in self._artifact_roots:
            raise ValueError(f"unknown artifact root kind {kind!r}")
        resolved = Path(path)
        if resolved not in self._artifact_roots[kind]:
            self._artifact_roots[kind].append(resolved)

    def delete_cascade(self, national_id: str) -> CascadeReport:
        """Remove every vault row and on-disk artifact belonging to the client."""
        report = CascadeReport()
        with self._lock:
            nid_hash = self._match_hash(national_id)
            raw = self._find_record(national_id_hash=nid_hash)
            if raw is None:
                return report
            pseudonym = raw["pseudonym"]
            before = len(self._state["records"]) + len(self._state["uid_mappings"])
            self._state["records"] = [r for r in self._state["records"] if r["pseudonym"] != pseudonym]
            self._state["uid_mappings"] = [
                m for m in self._state["uid_mappings"] if m["owner"] != pseudonym
            ]
            report.vault_rows_removed = before - (
                len(self._state["records"]) + len(self._state["uid_mappings"])
            )
            self._persist()
        for kind, roots in self._artifact_roots.items():
            for root in roots:
                client_dir = root / pseudonym
                if not client_dir.is_dir():
                    continue
                studies = sum(1 for p in client_dir.iterdir() if p.is_dir())
                shutil.rmtree(client_dir)
                if kind == "staged":
                    report.staged_studies_removed += studies
                else:
                    report.published_studies_removed += studies
        return report
