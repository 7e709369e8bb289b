"""Durable collection-case state, written atomically on every change.

Keyed by a salted hash of the original study UID so a crashed or repeated
cycle converges on the same case set instead of duplicating work.
"""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path

VALID_STATUSES = (
    "identified",
    "retrieved",
    "deidentified",
    "staged",
    "transferred",
    "quarantined",
    "deleted",
)

_ORDER = {status: i for i, status in enumerate(VALID_STATUSES[:5])}


class CaseState:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        if self.path.exists():
            self._data = json.loads(self.path.read_text())
        else:
            self._data = {"cases": {}, "clients": {}, "episodes": {}, "last_cycle_at": None}

    def _save(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._data, indent=1))
        os.replace(tmp, self.path)

    # -- cases ---------------------------------------------------------

    def case(self, case_key: str) -> dict | None:
        return self._data["cases"].get(case_key)

    def cases(self) -> dict[str, dict]:
        return dict(self._data["cases"])

    def upsert_case(self, case_key: str, **fields) -> dict:
        """Update a case; the status only ever advances.

        A crashed run may legitimately redo earlier steps, so a regressed
        status write is clamped to the current value rather than rejected.
        """
        case = self._data["cases"].setdefault(case_key, {"status": "identified"})
        status = fields.get("status")
        if status is not None and status not in VALID_STATUSES:
            raise ValueError(f"invalid status {status!r}")
        current = case.get("status", "identified")
        if status in _ORDER and current in _ORDER and _ORDER[status] < _ORDER[current]:
            fields = {k: v for k, v in fields.items() if k != "status"}
        case.update(fields)
        self._save()
        return case

    def delete_cases_for(self, pseudonym: str) -> int:
        doomed = [k for k, c in self._data["cases"].items() if c.get("pseudonym") == pseudonym]
        for key in doomed:
            self._data["cases"][key]["status"] = "deleted"
        if doomed:
            self._save()
        return len(doomed)

    # -- clients and episodes -------------------------------------------

    def client(self, pseudonym: str) -> dict | None:
        return self._data["clients"].get(pseudonym)

    def clients(self) -> dict[str, dict]:
        return dict(self._data["clients"])

    def upsert_client(self, pseudonym: str, **fields) -> None:
        self._data["clients"].setdefault(pseudonym, {}).update(fields)
        self._save()

    def episode(self, episode_id: str) -> dict | None:
        return self._data["episodes"].get(episode_id)

    def episodes(self) -> dict[str, dict]:
        return dict(self._data["episodes"])

    def upsert_episode(self, episode_id: str, **fields) -> None:
        self._data["episodes"].setdefault(episode_id, {}).update(fields)
        self._save()

    def mark_cycle_finished(self) -> None:
        self._data["last_cycle_at"] = datetime.now(timezone.utc).isoformat()
        self._save()

    @property
    def last_cycle_at(self) -> str | None:
        return self._data["last_cycle_at"]
