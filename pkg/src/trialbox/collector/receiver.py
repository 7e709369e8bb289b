"""Image receiver: accepts store frames from the archive and lands files on disk.

Each store is written to a temp name and renamed into place, then ACKed,
so an acknowledged image is durably on disk. Per-connection framing keeps
concurrent retrievals from interleaving.
"""

from __future__ import annotations

import base64
import os
import socketserver
import threading
from pathlib import Path

from ..sim.protocol import ProtocolError, recv_frame, send_frame


class Receiver:
    def __init__(self, incoming_dir: str | Path, host: str = "127.0.0.1", port: int = 0):
        self.incoming_dir = Path(incoming_dir)
        self.incoming_dir.mkdir(parents=True, exist_ok=True)
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
                    try:
                        outer._store(message)
                        send_frame(self.request, {"type": "ACK", "ok": True})
                    except Exception as exc:  # reject bad stores, keep serving
                        send_frame(self.request, {"type": "ACK", "ok": False, "error": str(exc)})

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def _store(self, message: dict) -> None:
        if message.get("type") != "STORE-RQ":
            raise ValueError(f"receiver got {message.get('type')!r}, expected STORE-RQ")
        study_uid = message["study_uid"]
        image_uid = message["image_uid"]
        if "/" in study_uid or "/" in image_uid:
            raise ValueError("refusing UID containing a path separator")
        payload = base64.b64decode(message["payload_b64"])
        study_dir = self.incoming_dir / study_uid
        study_dir.mkdir(parents=True, exist_ok=True)
        final = study_dir / f"{image_uid}.dcm"
        tmp = study_dir / f".{image_uid}.part"
        tmp.write_bytes(payload)
        os.replace(tmp, final)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "Receiver":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()
