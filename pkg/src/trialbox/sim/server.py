"""TCP servers simulating the hospital PACS and clinical system.

The PACS listener answers find queries and, on a move request, pushes the
study's images to the pre-registered receiver endpoint over fresh
connections (mirroring how an archive initiates stores to a known node).
The clinical listener answers episode queries on a second port. Both speak
the length-prefixed JSON frame protocol.
"""

from __future__ import annotations

import base64
import socket
import socketserver
import threading
from datetime import date, timedelta

from .corpus import ClinicalEpisode, Corpus, CorpusSpec, SimStudy, _build_study, _SentinelFactory, seed
from .protocol import ProtocolError, recv_frame, request, send_frame


class HospitalSim:
    """In-process hospital: corpus plus PACS and clinical frame servers."""

    def __init__(
        self,
        spec: CorpusSpec,
        pacs_port: int = 11112,
        clinical_port: int = 11113,
        receiver: tuple[str, int] | None = None,
        host: str = "127.0.0.1",
    ):
        self.corpus: Corpus = seed(spec)
        self._spec = spec
        self._lock = threading.Lock()
        self._receiver = receiver
        self._sentinels = _SentinelFactory()
        # keep post-seed sentinels disjoint from the seeded corpus
        self._sentinels._counters = {k: 500_000 for k in ("text", "person", "time", "decimal", "uid", "opaque")}
        self._uid_seq = 900_000
        self._episode_seq = 900_000
        self._pacs = _FrameServer((host, pacs_port), self._handle_pacs)
        self._clinical = _FrameServer((host, clinical_port), self._handle_clinical)

    # -- lifecycle ----------------------------------------------------

    def start(self) -> None:
        self._pacs.start()
        self._clinical.start()

    def stop(self) -> None:
        self._pacs.stop()
        self._clinical.stop()

    def __enter__(self) -> "HospitalSim":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def pacs_address(self) -> tuple[str, int]:
        return self._pacs.address

    @property
    def clinical_address(self) -> tuple[str, int]:
        return self._clinical.address

    def set_receiver(self, address: tuple[str, int]) -> None:
        self._receiver = address

    # -- corpus mutation (serialized) -----------------------------------

    def revise_episode(self, episode_id: str, new_outcome: str) -> None:
        with self._lock:
            for episode in self.corpus.episodes:
                if episode.episode_id == episode_id:
                    if episode.outcome != new_outcome:
                        episode.revised_from = episode.outcome
                        episode.outcome = new_outcome
                    return
            raise KeyError(f"no episode {episode_id}")

    def add_study_for(self, local_id: str, study_date: str = "20240901") -> SimStudy:
        """A later imaging event for an existing client, plus its episode."""
        with self._lock:
            client = None
            for study in self.corpus.studies:
                if study.local_id == local_id:
                    client = {
                        "national_id": study.national_id,
                        "local_id": local_id,
                        "birth_year": 1960,
                    }
                    break
            if client is None:
                raise KeyError(f"no client with local id {local_id}")

            def next_uid() -> str:
                self._uid_seq += 1
                return f"1.9.2.{self._uid_seq}"

            d = date(int(study_date[:4]), int(study_date[4:6]), int(study_date[6:8]))
            study, files = _build_study(
                client, d, next_uid, self._sentinels, [], has_unprocessed=False, burn_in=False
            )
            self.corpus.studies.append(study)
            self.corpus.images.update(files)
            self.corpus.study_images[study.study_uid] = list(files.keys())
            self._episode_seq += 1
            episode = ClinicalEpisode(
                local_id=local_id,
                episode_id=f"EP{self._episode_seq:06d}",
                outcome="pending",
                outcome_date=(d + timedelta(days=14)).isoformat(),
                national_id=client["national_id"],
                created_at=(d + timedelta(days=1)).isoformat(),
            )
            self.corpus.episodes.append(episode)
            return study

    # -- PACS handling ---------------------------------------------------

    def _handle_pacs(self, message: dict) -> dict:
        kind = message.get("type")
        if kind == "FIND-RQ":
            return {"type": "FIND-RSP", "studies": self._find(message.get("query") or {})}
        if kind == "MOVE-RQ":
            return self._move(message.get("study_uid", ""))
        return {"type": "ACK", "ok": False, "error": f"unknown message type {kind!r}"}

    def _find(self, query: dict) -> list[dict]:
        with self._lock:
            results = []
            for study in self.corpus.studies:
                if "local_id" in query and study.local_id != query["local_id"]:
                    continue
                if "modality" in query and study.modality != query["modality"]:
                    continue
                if "date_from" in query and study.study_date < query["date_from"]:
                    continue
                if "date_to" in query and study.study_date > query["date_to"]:
                    continue
                results.append(
                    {
                        "study_uid": study.study_uid,
                        "local_id": study.local_id,
                        "modality": study.modality,
                        "study_date": study.study_date,
                        "n_images": len(self.corpus.study_images[study.study_uid]),
                    }
                )
            return results

    def _move(self, study_uid: str) -> dict:
        with self._lock:
            if study_uid not in self.corpus.study_images:
                return {"type": "ACK", "ok": False, "error": "unknown-study"}
            image_uids = list(self.corpus.study_images[study_uid])
            payloads = [(uid, self.corpus.images[uid]) for uid in image_uids]
            receiver = self._receiver
        if receiver is None:
            return {"type": "ACK", "ok": False, "error": "no-receiver-registered"}
        delivered = 0
        try:
            with socket.create_connection(receiver, timeout=10) as sock:
                for image_uid, payload in payloads:
                    send_frame(
                        sock,
                        {
                            "type": "STORE-RQ",
                            "study_uid": study_uid,
                            "image_uid": image_uid,
                            "payload_b64": base64.b64encode(payload).decode("ascii"),
                        },
                    )
                    reply = recv_frame(sock)
                    if reply is None or not reply.get("ok", False):
                        return {"type": "ACK", "ok": False, "error": "receiver-rejected-store",
                                "delivered": delivered}
                    delivered += 1
        except OSError as exc:
            return {"type": "ACK", "ok": False, "error": f"receiver-unreachable: {exc}",
                    "delivered": delivered}
        return {"type": "ACK", "ok": True, "delivered": delivered}

    # -- clinical handling -------------------------------------------------

    def _handle_clinical(self, message: dict) -> dict:
        if message.get("type") != "CLIN-RQ":
            return {"type": "ACK", "ok": False, "error": "unknown message type"}
        kind = message.get("kind")
        with self._lock:
            if kind == "new-cases":
                since = message.get("since", "")
                episodes = [e for e in self.corpus.episodes if e.created_at > since]
                return {"type": "CLIN-RSP", "episodes": [e.as_dict() for e in episodes]}
            if kind == "outcomes":
                wanted = set(message.get("episode_ids") or [])
                episodes = [e for e in self.corpus.episodes if e.episode_id in wanted]
                return {"type": "CLIN-RSP", "episodes": [e.as_dict() for e in episodes]}
        return {"type": "ACK", "ok": False, "error": f"unknown clinical query {kind!r}"}


class _FrameServer:
    """Threaded TCP listener dispatching one frame handler per request."""

    def __init__(self, address: tuple[str, int], handler):
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                while True:
                    try:
                        message = recv_frame(self.request)
                    except ProtocolError as exc:
                        try:
                            send_frame(self.request, {"type": "ACK", "ok": False, "error": str(exc)})
                        except OSError:
                            pass
                        return
                    if message is None:
                        return
                    reply = outer._handler(message)
                    send_frame(self.request, reply)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._handler = handler
        self._server = Server(address, Handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
