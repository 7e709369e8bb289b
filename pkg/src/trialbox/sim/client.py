"""Client-side helpers for talking to the PACS and clinical simulators."""

from __future__ import annotations

from .corpus import ClinicalEpisode
from .protocol import ProtocolError, request


class PacsUnreachable(Exception):
    pass


class UnknownStudy(Exception):
    pass


class PacsClient:
    def __init__(self, address: tuple[str, int], timeout: float = 30.0):
        self.address = tuple(address)
        self.timeout = timeout

    def find(self, query: dict) -> list[dict]:
        try:
            reply = request(self.address, {"type": "FIND-RQ", "query": query}, timeout=self.timeout)
        except OSError as exc:
            raise PacsUnreachable(str(exc)) from exc
        if reply.get("type") != "FIND-RSP":
            raise ProtocolError(f"unexpected reply {reply.get('type')!r}: {reply.get('error')}")
        return reply["studies"]

    def retrieve(self, study_uid: str) -> int:
        """Ask the archive to push a study to the registered receiver; returns image count."""
        try:
            reply = request(self.address, {"type": "MOVE-RQ", "study_uid": study_uid}, timeout=self.timeout)
        except OSError as exc:
            raise PacsUnreachable(str(exc)) from exc
        if not reply.get("ok", False):
            if reply.get("error") == "unknown-study":
                raise UnknownStudy(study_uid)
            raise ProtocolError(reply.get("error", "retrieve failed"))
        return reply.get("delivered", 0)


class ClinicalClient:
    def __init__(self, address: tuple[str, int], timeout: float = 30.0):
        self.address = tuple(address)
        self.timeout = timeout

    def _query(self, body: dict) -> list[ClinicalEpisode]:
        try:
            reply = request(self.address, {"type": "CLIN-RQ", **body}, timeout=self.timeout)
        except OSError as exc:
            raise PacsUnreachable(str(exc)) from exc
        if reply.get("type") != "CLIN-RSP":
            raise ProtocolError(reply.get("error", "clinical query failed"))
        return [ClinicalEpisode(**row) for row in reply["episodes"]]

    def new_cases(self, since: str) -> list[ClinicalEpisode]:
        return self._query({"kind": "new-cases", "since": since})

    def outcomes(self, episode_ids: list[str]) -> list[ClinicalEpisode]:
        return self._query({"kind": "outcomes", "episode_ids": episode_ids})
